#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/series.hpp"

namespace hts {

struct Attribute {
    std::string name;
    std::vector<std::string> values;
};

/// Ordered list of grouping attributes, each with its admissible values.
class AttributeSchema {
public:
    AttributeSchema() = default;
    /// Throws InvalidSchema on duplicate names or values and empty value sets.
    explicit AttributeSchema(std::vector<Attribute> attributes);

    [[nodiscard]] const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    [[nodiscard]] std::size_t size() const noexcept { return attributes_.size(); }
    /// Throws UnknownAttribute.
    [[nodiscard]] std::size_t index_of(const std::string& name) const;
    [[nodiscard]] bool admits(std::size_t attribute, const std::string& value) const;

private:
    std::vector<Attribute> attributes_;
};

/// Partial binding attribute -> value. Unbound attributes are summed over.
/// Stored by schema position, so construction order never matters.
class SeriesKey {
public:
    SeriesKey() = default;
    explicit SeriesKey(std::map<std::size_t, std::string> bindings) : bindings_(std::move(bindings)) {}

    /// Binds attributes by name; throws UnknownAttribute / KeyOutsideSchema.
    static SeriesKey from_names(const AttributeSchema& schema, const std::map<std::string, std::string>& by_name);

    [[nodiscard]] const std::map<std::size_t, std::string>& bindings() const noexcept { return bindings_; }
    [[nodiscard]] std::size_t level() const noexcept { return bindings_.size(); }
    [[nodiscard]] bool is_root() const noexcept { return bindings_.empty(); }
    /// Keeps only the listed attribute positions.
    [[nodiscard]] SeriesKey restrict_to(const std::vector<std::size_t>& attributes) const;
    /// True when every binding of *this also appears in `bottom`.
    [[nodiscard]] bool covers(const SeriesKey& bottom) const;
    /// "total" for the root, otherwise "brand=b1/gender=F" in schema order.
    [[nodiscard]] std::string label(const AttributeSchema& schema) const;
    /// Inverse of label(). Throws KeyOutsideSchema.
    static SeriesKey parse_label(const AttributeSchema& schema, const std::string& label);

    friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
    friend bool operator==(const SeriesKey&, const SeriesKey&) = default;

private:
    std::map<std::size_t, std::string> bindings_;
};

/// Every materialised aggregation node: root first, bottom level last.
struct GroupStructure {
    AttributeSchema schema;
    std::vector<std::vector<std::size_t>> levels;  ///< attribute positions per level
    std::vector<SeriesKey> nodes;
    std::vector<SeriesKey> bottom;  ///< fully bound keys, same order as the tail of `nodes`

    [[nodiscard]] std::optional<std::size_t> find(const SeriesKey& key) const;
    [[nodiscard]] std::size_t bottom_offset() const noexcept { return nodes.size() - bottom.size(); }
};

/// Builds the node set from the observed bottom keys. `levels` lists attribute
/// names per aggregation level; the fully bound level is always appended.
/// Throws UnknownAttribute, EmptyBottom, KeyOutsideSchema.
[[nodiscard]] GroupStructure build_structure(const AttributeSchema& schema,
                                             const std::vector<std::vector<std::string>>& levels,
                                             const std::vector<SeriesKey>& bottom_keys);

struct SummingMatrix {
    Eigen::MatrixXd entries;  ///< nodes x bottom, 0/1
    std::map<SeriesKey, std::size_t> row_index;
    std::map<SeriesKey, std::size_t> col_index;
};

[[nodiscard]] SummingMatrix build_summing_matrix(const GroupStructure& structure);

struct Record {
    int week = 0;  ///< 0-based index into the calendar
    SeriesKey key;  ///< fully bound
    double quantity = 0.0;
};

/// Per-week sums of the records for every node, one series per node in
/// structure order. Weeks without records are zero.
/// Throws KeyOutsideSchema, NonFiniteQuantity, WeekOutsideCalendar.
[[nodiscard]] std::vector<TimeSeries> aggregate_records(const std::vector<Record>& records,
                                                        const GroupStructure& structure, const SummingMatrix& S,
                                                        int weeks, int period, const std::string& start = {});

}  // namespace hts
