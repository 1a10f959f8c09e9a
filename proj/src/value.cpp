#include <tvr/value.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <tvr/errors.hpp>

namespace tvr {

std::string to_string(const Value &v)
{
    struct {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            std::ostringstream os;
            os.precision(15);
            os << d;
            auto s = os.str();
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            return s;
        }
        std::string operator()(const std::string &s) const { return "'" + s + "'"; }
    } visitor;
    return std::visit(visitor, v);
}

std::string_view to_string(Kind k)
{
    switch (k) {
        case Kind::Int: return "int";
        case Kind::Float: return "float";
        case Kind::Text: return "text";
    }
    return "?";
}

Kind kind_from_string(std::string_view s)
{
    if (s == "int") return Kind::Int;
    if (s == "float") return Kind::Float;
    if (s == "text") return Kind::Text;
    throw TypeError("unknown column kind '" + std::string(s) + "'");
}

bool fits(const Value &v, Kind k)
{
    switch (v.index()) {
        case 0: return true;
        case 1: return k == Kind::Int;
        case 2: return k == Kind::Float;
        case 3: return k == Kind::Text;
    }
    return false;
}

Schema::Schema(std::vector<Column> columns, std::optional<std::vector<std::string>> key)
    : columns_(std::move(columns)), key_(std::move(key))
{
    std::set<std::string_view> seen;
    for (auto &c : columns_) {
        if (not seen.insert(c.name).second)
            throw SchemaError("duplicate column name '" + c.name + "'");
    }
    if (key_) {
        for (auto &k : *key_)
            if (not seen.contains(k))
                throw SchemaError("key column '" + k + "' is not a column");
    }
}

std::optional<std::size_t> Schema::find(std::string_view name) const
{
    for (std::size_t i = 0; i != columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const
{
    if (auto i = find(name)) return *i;
    throw NameError("no column '" + std::string(name) + "' in " + to_string());
}

std::vector<std::size_t> Schema::key_indices() const
{
    if (not key_) throw KeyError("schema " + to_string() + " has no key");
    std::vector<std::size_t> idx;
    for (auto &k : *key_) idx.push_back(index_of(k));
    return idx;
}

Schema Schema::nullable() const
{
    auto cols = columns_;
    for (auto &c : cols) c.nullable = true;
    return Schema(std::move(cols), key_);
}

Schema Schema::concat(const Schema &left, const Schema &right)
{
    auto cols = left.columns_;
    cols.insert(cols.end(), right.columns_.begin(), right.columns_.end());
    return Schema(std::move(cols));
}

bool Schema::compatible(const Schema &other) const
{
    return std::ranges::equal(columns_, other.columns_, [](const Column &a, const Column &b) {
        return a.name == b.name and a.kind == b.kind;
    });
}

std::string Schema::to_string() const
{
    std::string s = "(";
    for (std::size_t i = 0; i != columns_.size(); ++i) {
        if (i) s += ", ";
        s += columns_[i].name;
        s += ':';
        s += tvr::to_string(columns_[i].kind);
        if (columns_[i].nullable) s += '?';
    }
    s += ')';
    if (key_) {
        s += " key[";
        for (std::size_t i = 0; i != key_->size(); ++i) s += (i ? "," : "") + (*key_)[i];
        s += ']';
    }
    return s;
}

std::string to_string(const Tuple &t)
{
    std::string s = "(";
    for (std::size_t i = 0; i != t.size(); ++i) {
        if (i) s += ", ";
        s += to_string(t[i]);
    }
    return s + ")";
}

std::ostream & operator<<(std::ostream &out, const Value &v) { return out << to_string(v); }

}
