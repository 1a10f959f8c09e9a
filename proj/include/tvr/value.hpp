#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tvr {

/// A scalar or SQL null.  Alternatives are ordered null < Int < Float < Text, which gives the deterministic row
/// order used by every dump.
using Value = std::variant<std::monostate, int64_t, double, std::string>;

enum class Kind { Int, Float, Text };

inline bool is_null(const Value &v) { return std::holds_alternative<std::monostate>(v); }
std::string to_string(const Value &v);
std::string_view to_string(Kind k);
Kind kind_from_string(std::string_view s);
/// Whether `v` can live in a column of kind `k`; null is always accepted here, nullability is checked separately.
bool fits(const Value &v, Kind k);

struct Column
{
    std::string name;
    Kind kind = Kind::Int;
    bool nullable = false;

    bool operator==(const Column&) const = default;
};

class Schema
{
    std::vector<Column> columns_;
    std::optional<std::vector<std::string>> key_;

    public:
    Schema() = default;
    /// Throws SchemaError on duplicate names or a key naming unknown columns.
    explicit Schema(std::vector<Column> columns, std::optional<std::vector<std::string>> key = std::nullopt);

    const std::vector<Column> & columns() const { return columns_; }
    const std::optional<std::vector<std::string>> & key() const { return key_; }
    std::size_t arity() const { return columns_.size(); }
    const Column & operator[](std::size_t i) const { return columns_[i]; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Like find() but throws NameError.
    std::size_t index_of(std::string_view name) const;
    bool has(std::string_view name) const { return find(name).has_value(); }
    std::vector<std::size_t> key_indices() const;

    Schema with_key(std::optional<std::vector<std::string>> key) const { return Schema(columns_, std::move(key)); }
    /// Same columns, every column nullable.  Used for the padded side of an outer join.
    Schema nullable() const;
    /// Column-wise concatenation; throws SchemaError on a name clash.  The result carries no key.
    static Schema concat(const Schema &left, const Schema &right);

    /// Equality of column lists; keys are compared too.
    bool operator==(const Schema &other) const = default;
    /// Names and kinds agree, nullability may differ.
    bool compatible(const Schema &other) const;

    std::string to_string() const;
};

using Tuple = std::vector<Value>;

std::string to_string(const Tuple &t);
std::ostream & operator<<(std::ostream &out, const Value &v);

}
