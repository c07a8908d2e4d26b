#include "hts/log.hpp"

#include <iostream>
#include <mutex>

namespace hts {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& sink() {
    static WarningHandler handler = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return handler;
}

}  // namespace

void set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(sink_mutex());
    sink() = std::move(handler);
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (sink()) sink()(message);
}

}  // namespace hts
