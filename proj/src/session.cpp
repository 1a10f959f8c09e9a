#include <tvr/errors.hpp>
#include <tvr/session.hpp>

namespace tvr {

namespace {

[[noreturn]] void fail(const std::string &where, const std::string &what) { throw ParseError(where + ": " + what); }

int time_of(const Timeline &tl, const Json &j, const std::string &where)
{
    try {
        if (j.is_number_integer()) {
            int t = j.get<int>();
            tl.check(t);
            return t;
        }
        if (j.is_string()) return tl.parse(j.get<std::string>());
    } catch (const Error &e) {
        fail(where, e.what());
    }
    fail(where, "expected a time label");
}

Slot slot_from_json(const Timeline &tl, const Json &j, const std::string &where)
{
    if (auto it = j.find("snapshot"); it != j.end()) return Slot::snapshot(time_of(tl, *it, where + ".snapshot"));
    if (auto it = j.find("delta"); it != j.end()) {
        if (not it->is_array() or it->size() != 2) fail(where + ".delta", "expected [from, to]");
        int a = time_of(tl, (*it)[0], where + ".delta[0]"), b = time_of(tl, (*it)[1], where + ".delta[1]");
        if (a >= b) fail(where + ".delta", "delta must go forward in time");
        return Slot::delta(a, b);
    }
    fail(where, "expected \"snapshot\" or \"delta\"");
}

CostProfile profile_from_json(const Json &j, const std::string &where)
{
    if (j.is_string()) {
        try {
            return CostProfile::by_name(j.get<std::string>());
        } catch (const ParseError &e) {
            fail(where, e.what());
        }
    }
    if (not j.is_object()) fail(where, "expected a profile name or object");
    CostProfile p = CostProfile::by_name(j.value("base", std::string("output")));
    p.name = j.value("name", std::string("custom"));
    auto num = [&](const char *k, double &f) {
        if (auto it = j.find(k); it != j.end()) {
            if (not it->is_number()) fail(where + "." + k, "expected a number");
            f = it->get<double>();
            if (f < 0) fail(where + "." + k, "cost factors must be nonnegative");
        }
    };
    num("compute", p.compute);
    num("scan", p.scan);
    num("exchange", p.exchange);
    num("save", p.save);
    num("load", p.load);
    if (auto it = j.find("free_empty_merge"); it != j.end()) p.free_empty_merge = it->get<bool>();
    return p;
}

}

Session session_from_json(const Json &j, const std::string &source)
{
    Session s;
    if (not j.is_object()) fail(source, "expected an object");
    s.name = j.value("name", source);
    auto &tl = j.contains("timeline") ? j["timeline"] : Json();
    if (not tl.is_array() or tl.empty()) fail(source + ".timeline", "expected a nonempty array of labels");
    std::vector<std::string> labels;
    for (auto &l : tl) {
        if (not l.is_string()) fail(source + ".timeline", "labels must be strings");
        labels.push_back(l.get<std::string>());
    }
    try {
        s.arrivals.timeline = Timeline(labels);
    } catch (const Error &e) {
        fail(source + ".timeline", e.what());
    }
    auto &timeline = s.arrivals.timeline;
    int k = int(timeline.size());

    if (not j.contains("tables") or not j["tables"].is_object()) fail(source + ".tables", "expected an object");
    for (auto &[name, t] : j["tables"].items()) s.arrivals.declare(name, schema_from_json(t, source + ".tables." + name));

    if (auto it = j.find("arrivals"); it != j.end()) {
        if (not it->is_object()) fail(source + ".arrivals", "expected an object");
        for (auto &[name, per] : it->items()) {
            auto w = source + ".arrivals." + name;
            if (not s.arrivals.inputs.contains(name)) fail(w, "unknown table '" + name + "'");
            if (not per.is_object()) fail(w, "expected an object keyed by time label");
            auto schema = s.arrivals.input(name).schema;
            for (auto &[label, rows] : per.items()) {
                int t = time_of(timeline, label, w);
                auto rel = rows_from_json(rows, schema, w + "." + label);
                for (auto &[tuple, m] : rel.rows()) s.arrivals.add(name, t, tuple, m);
            }
            try {
                s.arrivals.input(name).validate();
            } catch (const Error &e) {
                fail(w, e.what());
            }
        }
    }

    s.requirement.queries.assign(k, nullptr);
    auto catalog = s.arrivals.catalog();
    auto check_query = [&](const LogicalPtr &q, const std::string &w) {
        try {
            output_schema(*q, catalog);
        } catch (const Error &e) {
            fail(w, e.what());
        }
    };
    if (auto it = j.find("queries"); it != j.end()) {
        if (not it->is_object()) fail(source + ".queries", "expected an object keyed by time label");
        for (auto &[label, q] : it->items()) {
            auto w = source + ".queries." + label;
            int t = time_of(timeline, label, w);
            s.requirement.queries[t] = query_from_json(q, w);
            check_query(s.requirement.queries[t], w);
        }
    } else {
        auto q = query_from_json(j.contains("query") ? j["query"] : Json(), source + ".query");
        check_query(q, source + ".query");
        auto outputs = j.value("outputs", Json("end"));
        if (outputs == "end") {
            s.requirement = OutputRequirement::at_end(k, q);
        } else if (outputs == "every") {
            s.requirement = OutputRequirement::at_every(k, q);
        } else if (outputs.is_array()) {
            for (auto &l : outputs) s.requirement.queries[time_of(timeline, l, source + ".outputs")] = q;
        } else {
            fail(source + ".outputs", "expected \"end\", \"every\" or a list of time labels");
        }
    }
    if (s.requirement.points().empty()) fail(source, "no output is required");

    auto cost = j.value("cost", Json());
    if (cost.is_null()) {
        s.cost = CostFunction::uniform(k);
    } else if (cost == "reverse_lexical" or (cost.is_object() and cost.value("reverse_lexical", false))) {
        s.cost = CostFunction::reverse_lexical();
    } else if (cost.is_object() and cost.contains("weights")) {
        auto &w = cost["weights"];
        if (not w.is_array() or int(w.size()) != k)
            fail(source + ".cost.weights", "expected " + std::to_string(k) + " weights, one per time point");
        std::vector<double> ws;
        for (auto &x : w) {
            if (not x.is_number() or x.get<double>() < 0) fail(source + ".cost.weights", "weights must be nonnegative numbers");
            ws.push_back(x.get<double>());
        }
        s.cost = CostFunction::weighted(ws);
    } else {
        fail(source + ".cost", "expected {\"weights\": [...]} or \"reverse_lexical\"");
    }

    if (auto it = j.find("profile"); it != j.end()) s.profile = profile_from_json(*it, source + ".profile");

    if (auto it = j.find("rules"); it != j.end()) {
        std::string spec;
        if (it->is_string()) {
            spec = it->get<std::string>();
        } else if (it->is_array()) {
            for (auto &r : *it) spec += (spec.empty() ? "" : ",") + r.get<std::string>();
        } else {
            fail(source + ".rules", "expected a string or a list");
        }
        try {
            s.rules = RuleFamilies::parse(spec);
        } catch (const ParseError &e) {
            fail(source + ".rules", e.what());
        }
    }

    if (auto it = j.find("materialized"); it != j.end()) {
        if (not it->is_array()) fail(source + ".materialized", "expected an array");
        for (std::size_t i = 0; i != it->size(); ++i) {
            auto &m = (*it)[i];
            auto w = source + ".materialized[" + std::to_string(i) + "]";
            auto id = m.value("id", std::string());
            if (id.empty()) fail(w, "missing \"id\"");
            std::optional<std::string> table;
            if (m.contains("table")) table = m["table"].get<std::string>();
            Schema schema;
            if (m.contains("schema")) schema = schema_from_json(m["schema"], w + ".schema");
            else if (table and s.arrivals.inputs.contains(*table)) schema = s.arrivals.input(*table).schema;
            else fail(w, "needs \"schema\" or a known \"table\"");
            auto rel = rows_from_json(m.value("rows", Json::array()), schema, w + ".rows");
            std::optional<Slot> slot;
            if (m.contains("slot")) slot = slot_from_json(timeline, m["slot"], w + ".slot");
            int from = m.contains("available_from") ? time_of(timeline, m["available_from"], w + ".available_from") : 0;
            register_materialized_state(s, id, std::move(rel), from, trait_from_json(m.value("trait", Json()), w + ".trait"),
                                        table, slot);
        }
    }
    return s;
}

Session load_session(const std::string &path) { return session_from_json(read_json_file(path), path); }

Json to_json(const Session &s)
{
    auto &tl = s.arrivals.timeline;
    Json tables = Json::object(), arrivals = Json::object();
    for (auto &[name, in] : s.arrivals.inputs) {
        tables[name] = to_json(in.schema);
        Json per = Json::object();
        for (auto &[t, d] : in.deltas)
            if (not d.empty()) per[tl.label(t)] = rows_to_json(d);
        arrivals[name] = per;
    }
    Json queries = Json::object();
    for (std::size_t t = 0; t != s.requirement.queries.size(); ++t)
        if (s.requirement.queries[t]) queries[tl.label(int(t))] = to_json(*s.requirement.queries[t]);
    Json o{ { "name", s.name },     { "timeline", tl.labels() }, { "tables", tables },
            { "arrivals", arrivals }, { "queries", queries },      { "rules", s.rules.to_string() } };
    if (s.cost.kind == CostFunction::Kind::ReverseLexical) o["cost"] = "reverse_lexical";
    else o["cost"] = { { "weights", s.cost.weights } };
    o["profile"] = { { "name", s.profile.name },       { "compute", s.profile.compute }, { "scan", s.profile.scan },
                     { "exchange", s.profile.exchange }, { "save", s.profile.save },     { "load", s.profile.load },
                     { "free_empty_merge", s.profile.free_empty_merge } };
    Json states = Json::array();
    for (auto &m : s.states) {
        Json j{ { "id", m.decl.id },
                { "schema", to_json(m.decl.schema) },
                { "rows", rows_to_json(m.relation) },
                { "available_from", tl.label(m.decl.available_from) },
                { "trait", to_json(m.trait) } };
        if (m.decl.table) j["table"] = *m.decl.table;
        if (m.decl.slot) {
            if (m.decl.slot->is_snapshot()) j["slot"] = { { "snapshot", tl.label(m.decl.slot->t) } };
            else j["slot"] = { { "delta", { tl.label(m.decl.slot->t), tl.label(m.decl.slot->t2) } } };
        }
        states.push_back(j);
    }
    if (not states.empty()) o["materialized"] = states;
    return o;
}

void register_materialized_state(Session &s, const std::string &id, BagRelation relation, int available_from, Trait trait,
                                 std::optional<std::string> table, std::optional<Slot> slot)
{
    for (auto &m : s.states)
        if (m.decl.id == id) throw ContractError("state '" + id + "' is already registered");
    s.arrivals.timeline.check(available_from);
    if (slot and not table) throw ContractError("state '" + id + "' declares a slot without a table");
    if (table) {
        auto &in = s.arrivals.input(*table);
        if (not in.schema.compatible(relation.schema()))
            throw SchemaError("state '" + id + "' has schema " + relation.schema().to_string() + ", table " + *table +
                              " has " + in.schema.to_string());
    }
    if (trait.hash)
        for (auto &c : *trait.hash)
            if (not relation.schema().has(c)) throw SchemaError("state '" + id + "' is not partitioned on a column named " + c);
    MaterializedState m;
    m.decl = { id, relation.schema(), available_from, std::move(table), slot };
    m.relation = std::move(relation);
    m.trait = std::move(trait);
    s.states.push_back(std::move(m));
}

std::map<std::string, BagRelation> state_relations(const Session &s)
{
    std::map<std::string, BagRelation> out;
    for (auto &m : s.states) out[m.decl.id] = m.relation;
    return out;
}

StateAvailability state_availability(const Session &s)
{
    StateAvailability out;
    for (auto &m : s.states) out[m.decl.id] = { m.decl.available_from, m.trait };
    return out;
}

PlanResult plan_session(const Session &s, const PlanOptions &options)
{
    ExploreOptions eo;
    eo.families = options.rules.value_or(s.rules);
    eo.translation_copy = options.translation_copy;
    eo.seed_interval = options.seed_interval;
    for (auto &m : s.states) eo.states.push_back(m.decl);
    PlanResult r{ explore(s.arrivals, s.requirement, eo), {}, {}, {}, {}, {}, {} };
    r.stats = exact_stats(r.exploration.memo, s.arrivals, state_relations(s));
    r.space = build_plan_space(r.exploration.memo, r.exploration.roots, r.stats, s.profile, state_availability(s));
    r.unshared = dp_search(r.space, s.cost);
    r.plan = options.share ? greedy_mqo(r.space, s.cost, true, &r.trace) : r.unshared;
    if (options.exhaustive_check) {
        try {
            auto x = exhaustive_search(r.space, s.cost, options.exhaustive_limit);
            r.exhaustive_agrees = not s.cost.less(x.objective, r.unshared.objective) and
                                  not s.cost.less(r.unshared.objective, x.objective);
        } catch (const RangeError&) {
        }
    }
    return r;
}

RunReport run_session(const Session &s, const TimedPlan &plan, StateStore &store, bool keep_relations)
{
    for (auto &m : s.states)
        if (not store.contains(m.decl.id)) store.save(m.decl.id, m.relation, m.trait, m.decl.available_from);
    ExecOptions o;
    o.profile = s.profile;
    o.keep_relations = keep_relations;
    o.store = &store;
    return execute(plan, s.arrivals, s.requirement, o);
}

std::vector<MethodRow> compare_methods(const Session &s, const PlanOptions &options)
{
    std::vector<MethodRow> rows;
    for (auto name : { "im1", "im2", "ojv", "all" }) {
        auto o = options;
        o.rules = RuleFamilies::parse(name);
        auto r = plan_session(s, o);
        StateStore store;
        auto report = run_session(s, r.plan, store);
        rows.push_back({ name, *o.rules, r.plan, reduce_cost(r.plan.cost, s.cost), account_tuples(report, s.profile) });
    }
    return rows;
}

}
