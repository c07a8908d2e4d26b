#pragma once

#include <functional>
#include <string>

namespace hts {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink. The default writes to stderr.
/// Passing an empty handler silences warnings.
void set_warning_handler(WarningHandler handler);

/// Emits a non-fatal diagnostic. Thread-safe.
void warn(const std::string& message);

}  // namespace hts
