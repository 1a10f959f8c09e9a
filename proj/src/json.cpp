#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <tvr/errors.hpp>
#include <tvr/json.hpp>

namespace tvr {

namespace {

[[noreturn]] void fail(const std::string &where, const std::string &what) { throw ParseError(where + ": " + what); }

const Json & member(const Json &j, const char *name, const std::string &where)
{
    if (not j.is_object()) fail(where, "expected an object");
    auto it = j.find(name);
    if (it == j.end()) fail(where, std::string("missing \"") + name + "\"");
    return *it;
}

std::string get_string(const Json &j, const std::string &where)
{
    if (not j.is_string()) fail(where, "expected a string");
    return j.get<std::string>();
}

int get_int(const Json &j, const std::string &where)
{
    if (not j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

std::vector<std::string> get_strings(const Json &j, const std::string &where)
{
    if (not j.is_array()) fail(where, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i != j.size(); ++i) out.push_back(get_string(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::string squash(std::string_view s)
{
    std::string out;
    for (char c : s)
        if (c != '_') out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

OpKind kind_from_name(const std::string &name, const std::string &where)
{
    static const std::pair<const char*, OpKind> aliases[] = {
        { "join", OpKind::InnerJoin },
        { "semijoin", OpKind::LeftSemiJoin },
        { "antijoin", OpKind::LeftAntiJoin },
        { "unionall", OpKind::Union },
        { "leftjoin", OpKind::LeftOuterJoin },
    };
    auto key = squash(name);
    for (auto &[a, k] : aliases)
        if (key == a) return k;
    for (int i = 0; i <= int(OpKind::OjvIndirect); ++i)
        if (squash(to_string(OpKind(i))) == key) return OpKind(i);
    fail(where, "unknown operator '" + name + "'");
}

}

Json parse_json(const std::string &text, const std::string &source)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error &e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte and i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.what());
    }
}

Json read_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (not in) throw ParseError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path);
}

Json to_json(const Value &v)
{
    switch (v.index()) {
        case 1: return std::get<int64_t>(v);
        case 2: return std::get<double>(v);
        case 3: return std::get<std::string>(v);
        default: return nullptr;
    }
}

Value value_from_json(const Json &j, const Column &c, const std::string &where)
{
    if (j.is_null()) return std::monostate{};
    switch (c.kind) {
        case Kind::Int:
            if (j.is_number_integer()) return j.get<int64_t>();
            break;
        case Kind::Float:
            if (j.is_number()) return j.get<double>();
            break;
        case Kind::Text:
            if (j.is_string()) return j.get<std::string>();
            break;
    }
    fail(where, "value " + j.dump() + " does not fit column " + c.name + " of kind " + std::string(to_string(c.kind)));
}

Json to_json(const Schema &s)
{
    Json cols = Json::array();
    for (auto &c : s.columns()) {
        Json o{ { "name", c.name }, { "type", to_string(c.kind) } };
        if (c.nullable) o["nullable"] = true;
        cols.push_back(o);
    }
    Json out{ { "columns", cols } };
    if (s.key()) out["key"] = *s.key();
    return out;
}

Schema schema_from_json(const Json &j, const std::string &where)
{
    auto &cols = member(j, "columns", where);
    if (not cols.is_array()) fail(where + ".columns", "expected an array");
    std::vector<Column> columns;
    for (std::size_t i = 0; i != cols.size(); ++i) {
        auto w = where + ".columns[" + std::to_string(i) + "]";
        Column c;
        c.name = get_string(member(cols[i], "name", w), w + ".name");
        try {
            c.kind = kind_from_string(get_string(member(cols[i], "type", w), w + ".type"));
        } catch (const TypeError &e) {
            fail(w, e.what());
        }
        if (auto it = cols[i].find("nullable"); it != cols[i].end()) {
            if (not it->is_boolean()) fail(w + ".nullable", "expected a boolean");
            c.nullable = it->get<bool>();
        }
        columns.push_back(std::move(c));
    }
    std::optional<std::vector<std::string>> key;
    if (auto it = j.find("key"); it != j.end() and not it->is_null()) key = get_strings(*it, where + ".key");
    try {
        return Schema(std::move(columns), std::move(key));
    } catch (const SchemaError &e) {
        fail(where, e.what());
    }
}

Json rows_to_json(const BagRelation &r)
{
    Json rows = Json::array();
    for (auto &[t, m] : r.rows()) {
        Json vals = Json::array();
        for (auto &v : t) vals.push_back(to_json(v));
        rows.push_back({ { "values", vals }, { "mult", m } });
    }
    return rows;
}

BagRelation rows_from_json(const Json &j, const Schema &s, const std::string &where)
{
    if (not j.is_array()) fail(where, "expected an array of rows");
    BagRelation r(s);
    for (std::size_t i = 0; i != j.size(); ++i) {
        auto w = where + "[" + std::to_string(i) + "]";
        const Json *vals = &j[i];
        int64_t mult = 1;
        if (j[i].is_object()) {
            vals = &member(j[i], "values", w);
            if (auto it = j[i].find("mult"); it != j[i].end()) {
                if (not it->is_number_integer()) fail(w + ".mult", "expected an integer");
                mult = it->get<int64_t>();
            }
        }
        if (not vals->is_array()) fail(w, "expected an array of values");
        if (vals->size() != s.arity())
            fail(w, "row has " + std::to_string(vals->size()) + " values, schema has " + std::to_string(s.arity()));
        Tuple t;
        for (std::size_t c = 0; c != vals->size(); ++c) t.push_back(value_from_json((*vals)[c], s[c], w));
        try {
            r.add(std::move(t), mult);
        } catch (const Error &e) {
            fail(w, e.what());
        }
    }
    return r;
}

Json to_json(const BagRelation &r) { return { { "schema", to_json(r.schema()) }, { "rows", rows_to_json(r) } }; }

BagRelation relation_from_json(const Json &j, const std::string &where)
{
    auto s = schema_from_json(member(j, "schema", where), where + ".schema");
    return rows_from_json(member(j, "rows", where), s, where + ".rows");
}

Json to_json(const Scalar &e)
{
    switch (e.op) {
        case Scalar::Op::Col: return { { "col", e.column } };
        case Scalar::Op::Lit: {
            Json o{ { "lit", to_json(e.literal) } };
            if (is_null(e.literal)) o["kind"] = to_string(e.literal_kind);
            return o;
        }
        default: {
            Json args = Json::array();
            for (auto &a : e.args) args.push_back(to_json(*a));
            return { { "op", to_string(e.op) }, { "args", args } };
        }
    }
}

ScalarPtr scalar_from_json(const Json &j, const std::string &where)
{
    if (j.is_string()) return col(j.get<std::string>());
    if (j.is_boolean()) return lit(int64_t(j.get<bool>()));
    if (j.is_number_integer()) return lit(j.get<int64_t>());
    if (j.is_number()) return lit(j.get<double>());
    if (not j.is_object()) fail(where, "expected an expression");
    if (auto it = j.find("col"); it != j.end()) return col(get_string(*it, where + ".col"));
    if (auto it = j.find("lit"); it != j.end()) {
        if (it->is_null()) {
            Kind k = Kind::Int;
            if (auto kt = j.find("kind"); kt != j.end()) {
                try {
                    k = kind_from_string(get_string(*kt, where + ".kind"));
                } catch (const TypeError &e) {
                    fail(where, e.what());
                }
            }
            return null_of(k);
        }
        if (it->is_string()) return lit(it->get<std::string>());
        if (it->is_boolean()) return lit(int64_t(it->get<bool>()));
        if (it->is_number_integer()) return lit(it->get<int64_t>());
        if (it->is_number()) return lit(it->get<double>());
        fail(where + ".lit", "expected a scalar literal");
    }
    Scalar::Op op;
    try {
        op = scalar_op_from_string(get_string(member(j, "op", where), where + ".op"));
    } catch (const ParseError &e) {
        fail(where, e.what());
    }
    auto &args = member(j, "args", where);
    if (not args.is_array()) fail(where + ".args", "expected an array");
    if (args.size() != arity(op))
        fail(where, std::string(to_string(op)) + " takes " + std::to_string(arity(op)) + " arguments");
    std::vector<ScalarPtr> a;
    for (std::size_t i = 0; i != args.size(); ++i) a.push_back(scalar_from_json(args[i], where + ".args[" + std::to_string(i) + "]"));
    return make(op, std::move(a));
}

Json to_json(const AggSpec &a)
{
    Json calls = Json::array();
    for (auto &c : a.aggregates) {
        Json o{ { "out", c.output }, { "fn", to_string(c.fn) } };
        if (not c.input.empty()) o["in"] = c.input;
        calls.push_back(o);
    }
    return { { "group", a.group_keys }, { "aggs", calls } };
}

AggSpec agg_from_json(const Json &j, const std::string &where)
{
    AggSpec a;
    if (auto it = j.find("group"); it != j.end()) a.group_keys = get_strings(*it, where + ".group");
    auto &calls = member(j, "aggs", where);
    if (not calls.is_array()) fail(where + ".aggs", "expected an array");
    for (std::size_t i = 0; i != calls.size(); ++i) {
        auto w = where + ".aggs[" + std::to_string(i) + "]";
        AggCall c;
        c.output = get_string(member(calls[i], "out", w), w + ".out");
        try {
            c.fn = agg_func_from_string(get_string(member(calls[i], "fn", w), w + ".fn"));
        } catch (const Error &e) {
            fail(w, e.what());
        }
        if (auto it = calls[i].find("in"); it != calls[i].end()) c.input = get_string(*it, w + ".in");
        if (c.input.empty() and c.fn != AggFunc::COUNT) fail(w, "only COUNT may omit its input column");
        a.aggregates.push_back(std::move(c));
    }
    return a;
}

Json to_json(const Operator &op)
{
    Json o{ { "kind", to_string(op.kind) } };
    if (not op.table.empty()) o["table"] = op.table;
    if (op.t >= 0) o["t"] = op.t;
    if (op.t2 >= 0) o["t2"] = op.t2;
    if (op.pred) o["pred"] = to_json(*op.pred);
    if (not op.projections.empty()) {
        Json cols = Json::array();
        for (auto &p : op.projections) cols.push_back({ { "name", p.name }, { "expr", to_json(*p.expr) } });
        o["projections"] = cols;
    }
    if (op.agg) o["agg"] = to_json(*op.agg);
    if (op.schema) o["schema"] = to_json(*op.schema);
    return o;
}

Operator operator_from_json(const Json &j, const std::string &where)
{
    Operator op;
    op.kind = kind_from_name(get_string(member(j, "kind", where), where + ".kind"), where);
    if (auto it = j.find("table"); it != j.end()) op.table = get_string(*it, where + ".table");
    if (auto it = j.find("t"); it != j.end()) op.t = get_int(*it, where + ".t");
    if (auto it = j.find("t2"); it != j.end()) op.t2 = get_int(*it, where + ".t2");
    if (auto it = j.find("pred"); it != j.end()) op.pred = scalar_from_json(*it, where + ".pred");
    if (auto it = j.find("on"); it != j.end()) op.pred = scalar_from_json(*it, where + ".on");
    if (auto it = j.find("projections"); it != j.end()) {
        if (not it->is_array()) fail(where + ".projections", "expected an array");
        for (std::size_t i = 0; i != it->size(); ++i) {
            auto w = where + ".projections[" + std::to_string(i) + "]";
            op.projections.push_back({ get_string(member((*it)[i], "name", w), w + ".name"),
                                       scalar_from_json(member((*it)[i], "expr", w), w + ".expr") });
        }
    }
    if (auto it = j.find("agg"); it != j.end()) op.agg = std::make_shared<const AggSpec>(agg_from_json(*it, where + ".agg"));
    if (auto it = j.find("schema"); it != j.end())
        op.schema = std::make_shared<const Schema>(schema_from_json(*it, where + ".schema"));
    return op;
}

Json to_json(const LogicalNode &n)
{
    auto o = to_json(n.op);
    if (not n.children.empty()) {
        Json in = Json::array();
        for (auto &c : n.children) in.push_back(to_json(*c));
        o["inputs"] = in;
    }
    return o;
}

LogicalPtr query_from_json(const Json &j, const std::string &where)
{
    auto op = operator_from_json(j, where);
    int a = arity(op.kind);
    if (op.kind == OpKind::Scan and op.table.empty()) fail(where, "scan needs a table");
    if (op.kind == OpKind::Aggregate and not op.agg) fail(where, "aggregate needs \"agg\"");
    if (op.kind == OpKind::Project and op.projections.empty()) fail(where, "project needs \"projections\"");
    if (op.kind == OpKind::Filter and not op.pred) fail(where, "filter needs \"pred\"");
    if (is_join(op.kind) and not op.pred) fail(where, "join needs \"on\"");
    std::vector<LogicalPtr> children;
    auto add = [&](const Json &c, const std::string &w) { children.push_back(query_from_json(c, w)); };
    if (auto it = j.find("inputs"); it != j.end()) {
        if (not it->is_array()) fail(where + ".inputs", "expected an array");
        for (std::size_t i = 0; i != it->size(); ++i) add((*it)[i], where + ".inputs[" + std::to_string(i) + "]");
    } else {
        if (auto it = j.find("input"); it != j.end()) add(*it, where + ".input");
        if (auto it = j.find("left"); it != j.end()) add(*it, where + ".left");
        if (auto it = j.find("right"); it != j.end()) add(*it, where + ".right");
    }
    if (a >= 0 and std::size_t(a) != children.size())
        fail(where, std::string(to_string(op.kind)) + " takes " + std::to_string(a) + " inputs, got " +
                        std::to_string(children.size()));
    return node(std::move(op), std::move(children));
}

Json to_json(const Trait &t)
{
    if (t.is_none()) return nullptr;
    return { { "hash", *t.hash } };
}

Trait trait_from_json(const Json &j, const std::string &where)
{
    if (j.is_null()) return Trait::none();
    if (j.is_array()) return Trait::hashed(get_strings(j, where));
    return Trait::hashed(get_strings(member(j, "hash", where), where + ".hash"));
}

Json to_json(const TimedPlan &p, const CostFunction *f)
{
    Json nodes = Json::array();
    for (auto &n : p.nodes)
        nodes.push_back({ { "id", n.id },
                          { "class", n.cls },
                          { "group", n.group },
                          { "trait", to_json(n.trait) },
                          { "kind", to_string(n.kind) },
                          { "op", to_json(n.op) },
                          { "children", n.children },
                          { "time", n.time },
                          { "by_product", n.by_product },
                          { "rows", n.cardinality },
                          { "cost", n.cost },
                          { "save_cost", n.save_cost },
                          { "load_cost", n.load_cost },
                          { "shared", p.materialized.contains(n.id) } });
    Json roots = Json::array();
    for (auto &[t, r] : p.roots) roots.push_back({ { "time", t }, { "node", r } });
    Json transfers = Json::array();
    for (auto &[c, times] : p.cross_time_edges())
        transfers.push_back({ { "node", c },
                              { "saved_at", p.nodes[c].time },
                              { "loaded_at", std::vector<int>(times.begin(), times.end()) },
                              { "persisted", p.nodes[c].by_product } });
    Json o{ { "points", p.points }, { "nodes", nodes },   { "roots", roots },
            { "cost", p.cost },     { "objective", p.objective }, { "transfers", transfers } };
    if (f) {
        o["cost_function"] = f->to_string();
        o["total"] = reduce_cost(p.cost, *f);
        o["objective_total"] = reduce_cost(p.objective, *f);
    }
    return o;
}

TimedPlan plan_from_json(const Json &j)
{
    const std::string where = "plan";
    TimedPlan p;
    p.points = get_int(member(j, "points", where), where + ".points");
    auto &nodes = member(j, "nodes", where);
    if (not nodes.is_array()) fail(where + ".nodes", "expected an array");
    for (std::size_t i = 0; i != nodes.size(); ++i) {
        auto w = where + ".nodes[" + std::to_string(i) + "]";
        auto &o = nodes[i];
        PlanNode n;
        n.id = get_int(member(o, "id", w), w + ".id");
        if (n.id != int(i)) fail(w, "node ids must be dense and in order");
        n.cls = o.value("class", -1);
        n.group = o.value("group", -1);
        n.trait = trait_from_json(o.value("trait", Json()), w + ".trait");
        try {
            n.kind = phys_kind_from_string(get_string(member(o, "kind", w), w + ".kind"));
        } catch (const Error &e) {
            fail(w, e.what());
        }
        n.op = operator_from_json(member(o, "op", w), w + ".op");
        for (auto &c : member(o, "children", w)) {
            if (not c.is_number_integer() or c.get<int>() < 0 or c.get<int>() >= n.id) fail(w, "bad child reference");
            n.children.push_back(c.get<int>());
        }
        n.time = get_int(member(o, "time", w), w + ".time");
        if (n.time < 0 or n.time >= p.points) fail(w, "time outside the plan");
        n.by_product = o.value("by_product", false);
        n.cardinality = o.value("rows", int64_t(0));
        n.cost = o.value("cost", 0.0);
        n.save_cost = o.value("save_cost", 0.0);
        n.load_cost = o.value("load_cost", 0.0);
        if (o.value("shared", false)) p.materialized.insert(n.id);
        p.nodes.push_back(std::move(n));
    }
    for (auto &r : member(j, "roots", where)) {
        int t = get_int(member(r, "time", where + ".roots"), where + ".roots.time");
        int n = get_int(member(r, "node", where + ".roots"), where + ".roots.node");
        if (n < 0 or n >= int(p.nodes.size())) fail(where + ".roots", "bad node reference");
        p.roots[t] = n;
    }
    p.cost = plan_cost(p);
    if (auto it = j.find("objective"); it != j.end()) p.objective = it->get<CostVector>();
    return p;
}

Json to_json(const RunReport &r, const CostFunction *f)
{
    Json times = Json::array();
    for (auto &t : r.times) {
        Json nodes = Json::array();
        for (auto &n : t.nodes)
            nodes.push_back({ { "node", n.node }, { "kind", to_string(n.kind) }, { "tuples", n.tuples }, { "cost", n.cost } });
        Json o{ { "time", t.time }, { "cost", t.cost }, { "exchanged", t.exchanged }, { "computed", t.computed },
                { "nodes", nodes } };
        if (t.output) o["output"] = to_json(*t.output);
        if (t.oracle_match) o["oracle_match"] = *t.oracle_match;
        times.push_back(o);
    }
    Json o{ { "cost", r.cost }, { "times", times } };
    if (f) o["total"] = reduce_cost(r.cost, *f);
    return o;
}

}
