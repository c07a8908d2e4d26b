#include "hts/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/core.h>

#include "hts/errors.hpp"

namespace hts {

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    std::set<std::string> seen;
    for (const auto& a : attributes_) {
        if (a.name.empty()) throw config_error("InvalidSchema", "attribute names must be non-empty");
        if (!seen.insert(a.name).second)
            throw config_error("InvalidSchema", fmt::format("duplicate attribute '{}'", a.name));
        if (a.values.empty())
            throw config_error("InvalidSchema", fmt::format("attribute '{}' has no values", a.name));
        if (std::set<std::string>(a.values.begin(), a.values.end()).size() != a.values.size())
            throw config_error("InvalidSchema", fmt::format("attribute '{}' lists a value twice", a.name));
        for (const auto& v : a.values)
            if (v.empty() || v.find_first_of("/=,\"") != std::string::npos)
                throw config_error("InvalidSchema",
                                   fmt::format("attribute '{}' value '{}' is empty or contains / = , or \"", a.name, v));
    }
}

std::size_t AttributeSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i].name == name) return i;
    throw config_error("UnknownAttribute", fmt::format("attribute '{}' is not in the schema", name));
}

bool AttributeSchema::admits(std::size_t attribute, const std::string& value) const {
    if (attribute >= attributes_.size()) return false;
    const auto& vals = attributes_[attribute].values;
    return std::find(vals.begin(), vals.end(), value) != vals.end();
}

SeriesKey SeriesKey::from_names(const AttributeSchema& schema, const std::map<std::string, std::string>& by_name) {
    std::map<std::size_t, std::string> b;
    for (const auto& [name, value] : by_name) {
        const auto idx = schema.index_of(name);
        if (!schema.admits(idx, value))
            throw data_error("KeyOutsideSchema", fmt::format("value '{}' is not allowed for '{}'", value, name));
        b.emplace(idx, value);
    }
    return SeriesKey(std::move(b));
}

SeriesKey SeriesKey::restrict_to(const std::vector<std::size_t>& attributes) const {
    std::map<std::size_t, std::string> b;
    for (auto a : attributes)
        if (auto it = bindings_.find(a); it != bindings_.end()) b.emplace(a, it->second);
    return SeriesKey(std::move(b));
}

bool SeriesKey::covers(const SeriesKey& bottom) const {
    for (const auto& [attr, value] : bindings_) {
        auto it = bottom.bindings_.find(attr);
        if (it == bottom.bindings_.end() || it->second != value) return false;
    }
    return true;
}

std::string SeriesKey::label(const AttributeSchema& schema) const {
    if (bindings_.empty()) return "total";
    std::string out;
    for (const auto& [attr, value] : bindings_) {
        if (!out.empty()) out += '/';
        out += schema.attributes().at(attr).name + "=" + value;
    }
    return out;
}

SeriesKey SeriesKey::parse_label(const AttributeSchema& schema, const std::string& label) {
    if (label == "total") return {};
    std::map<std::string, std::string> by_name;
    std::size_t pos = 0;
    while (pos <= label.size()) {
        const auto end = std::min(label.find('/', pos), label.size());
        const auto part = label.substr(pos, end - pos);
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw data_error("KeyOutsideSchema", fmt::format("malformed series key '{}'", label));
        by_name[part.substr(0, eq)] = part.substr(eq + 1);
        pos = end + 1;
    }
    return from_names(schema, by_name);
}

std::optional<std::size_t> GroupStructure::find(const SeriesKey& key) const {
    auto it = std::find(nodes.begin(), nodes.end(), key);
    if (it == nodes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

GroupStructure build_structure(const AttributeSchema& schema, const std::vector<std::vector<std::string>>& levels,
                               const std::vector<SeriesKey>& bottom_keys) {
    if (levels.empty()) throw config_error("InvalidLevels", "at least one aggregation level is required");
    if (bottom_keys.empty()) throw data_error("EmptyBottom", "no bottom-level series observed");

    GroupStructure gs;
    gs.schema = schema;
    for (const auto& level : levels) {
        std::vector<std::size_t> idx;
        for (const auto& name : level) idx.push_back(schema.index_of(name));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        gs.levels.push_back(std::move(idx));
    }

    std::set<SeriesKey> bottom;
    for (const auto& key : bottom_keys) {
        if (key.level() != schema.size())
            throw data_error("KeyOutsideSchema", fmt::format("bottom key '{}' does not bind every attribute",
                                                             key.label(schema)));
        for (const auto& [attr, value] : key.bindings())
            if (!schema.admits(attr, value))
                throw data_error("KeyOutsideSchema", fmt::format("bottom key '{}' uses values outside the schema",
                                                                 key.label(schema)));
        bottom.insert(key);
    }

    std::set<SeriesKey> seen{SeriesKey{}};
    gs.nodes.emplace_back();
    for (const auto& level : gs.levels) {
        if (level.size() == schema.size()) continue;  // the bottom level goes last
        std::set<SeriesKey> level_keys;
        for (const auto& key : bottom) level_keys.insert(key.restrict_to(level));
        for (const auto& key : level_keys)
            if (seen.insert(key).second) gs.nodes.push_back(key);
    }
    for (const auto& key : bottom) {
        if (seen.insert(key).second) gs.nodes.push_back(key);
        gs.bottom.push_back(key);
    }
    return gs;
}

SummingMatrix build_summing_matrix(const GroupStructure& structure) {
    SummingMatrix S;
    const auto rows = static_cast<Eigen::Index>(structure.nodes.size());
    const auto cols = static_cast<Eigen::Index>(structure.bottom.size());
    S.entries = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t i = 0; i < structure.nodes.size(); ++i) S.row_index.emplace(structure.nodes[i], i);
    for (std::size_t j = 0; j < structure.bottom.size(); ++j) S.col_index.emplace(structure.bottom[j], j);
    for (std::size_t i = 0; i < structure.nodes.size(); ++i)
        for (std::size_t j = 0; j < structure.bottom.size(); ++j)
            if (structure.nodes[i].covers(structure.bottom[j]))
                S.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    return S;
}

std::vector<TimeSeries> aggregate_records(const std::vector<Record>& records, const GroupStructure& structure,
                                          const SummingMatrix& S, int weeks, int period, const std::string& start) {
    if (weeks < 1) throw config_error("InvalidCalendar", "calendar must span at least one week");
    Eigen::MatrixXd bottom = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(structure.bottom.size()), weeks);
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (!std::isfinite(rec.quantity))
            throw data_error("NonFiniteQuantity", fmt::format("record {} has a non-finite quantity", r));
        if (rec.week < 0 || rec.week >= weeks)
            throw data_error("WeekOutsideCalendar",
                             fmt::format("record {} falls in week {} outside the {}-week calendar", r, rec.week, weeks));
        auto it = S.col_index.find(rec.key);
        if (it == S.col_index.end())
            throw data_error("KeyOutsideSchema", fmt::format("record {} key '{}' is not a bottom series", r,
                                                             rec.key.label(structure.schema)));
        bottom(static_cast<Eigen::Index>(it->second), rec.week) += rec.quantity;
    }
    const Eigen::MatrixXd all = S.entries * bottom;
    std::vector<TimeSeries> out;
    out.reserve(structure.nodes.size());
    for (Eigen::Index i = 0; i < all.rows(); ++i) {
        std::vector<double> v(static_cast<std::size_t>(weeks));
        for (int t = 0; t < weeks; ++t) v[static_cast<std::size_t>(t)] = all(i, t);
        out.emplace_back(std::move(v), period, start);
    }
    return out;
}

}  // namespace hts
