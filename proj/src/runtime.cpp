#include <fstream>
#include <sstream>
#include <tvr/errors.hpp>
#include <tvr/json.hpp>
#include <tvr/runtime.hpp>

namespace tvr {

namespace {

std::filesystem::path state_file(const std::filesystem::path &dir, const std::string &id)
{
    std::string name;
    for (char c : id) name.push_back(std::isalnum(static_cast<unsigned char>(c)) or c == '-' or c == '_' ? c : '_');
    return dir / (name + ".json");
}

bool is_leaf_kind(PhysKind k)
{
    return k == PhysKind::TableScanAt or k == PhysKind::DeltaScanAt or k == PhysKind::EmptyScan or k == PhysKind::StateScan;
}

bool is_merge_kind(PhysKind k) { return k == PhysKind::MergeUnion or k == PhysKind::IncrAggregateMerge; }

}

StateStore::StateStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(*dir_); }

void StateStore::save(const std::string &id, BagRelation relation, Trait trait, int t)
{
    Entry e{ std::move(relation), std::move(trait), t };
    if (dir_) {
        Json j{ { "id", id }, { "saved_at", t }, { "trait", to_json(e.trait) }, { "relation", to_json(e.relation) } };
        std::ofstream out(state_file(*dir_, id));
        if (not out) throw StateError("cannot write state '" + id + "' to " + dir_->string());
        out << j.dump(1) << "\n";
    }
    entries_[id] = std::move(e);
}

const StateStore::Entry * StateStore::find(const std::string &id) const
{
    if (auto it = entries_.find(id); it != entries_.end()) return &it->second;
    if (not dir_) return nullptr;
    auto path = state_file(*dir_, id);
    if (not std::filesystem::exists(path)) return nullptr;
    try {
        auto j = read_json_file(path.string());
        Entry e{ relation_from_json(j.at("relation"), "state " + id), trait_from_json(j.value("trait", Json())),
                 j.at("saved_at").get<int>() };
        return &(entries_[id] = std::move(e));
    } catch (const Json::exception &e) {
        throw StateError("state file " + path.string() + " is malformed: " + e.what());
    } catch (const ParseError &e) {
        throw StateError("state file " + path.string() + " is malformed: " + e.what());
    }
}

const BagRelation & StateStore::load(const std::string &id, int t) const
{
    auto e = find(id);
    if (not e) throw StateError("no saved state '" + id + "'");
    if (e->saved_at > t)
        throw StateError("state '" + id + "' is saved at " + std::to_string(e->saved_at) + ", read at " + std::to_string(t));
    return e->relation;
}

bool StateStore::contains(const std::string &id) const { return find(id) != nullptr; }

std::vector<std::string> StateStore::ids() const
{
    std::set<std::string> out;
    for (auto &[id, e] : entries_) out.insert(id);
    if (dir_)
        for (auto &f : std::filesystem::directory_iterator(*dir_))
            if (f.path().extension() == ".json") out.insert(f.path().stem().string());
    return { out.begin(), out.end() };
}

bool RunReport::operator==(const RunReport &o) const
{
    if (cost != o.cost or times.size() != o.times.size() or relations != o.relations) return false;
    for (std::size_t i = 0; i != times.size(); ++i) {
        auto &a = times[i], &b = o.times[i];
        if (a.time != b.time or a.cost != b.cost or a.exchanged != b.exchanged or a.computed != b.computed or
            a.output != b.output or a.oracle_match != b.oracle_match or a.nodes.size() != b.nodes.size())
            return false;
        for (std::size_t j = 0; j != a.nodes.size(); ++j)
            if (a.nodes[j].node != b.nodes[j].node or a.nodes[j].tuples != b.nodes[j].tuples or
                a.nodes[j].cost != b.nodes[j].cost)
                return false;
    }
    return true;
}

std::string state_id(const TimedPlan &plan, int node)
{
    auto &n = plan.nodes.at(node);
    return "N" + std::to_string(node) + "@" + std::to_string(n.time);
}

RunReport execute(const TimedPlan &plan, const Arrivals &arrivals, const OutputRequirement &req, const ExecOptions &options)
{
    int k = int(arrivals.timeline.size());
    if (plan.points != k)
        throw ContractError("plan covers " + std::to_string(plan.points) + " points, timeline has " + std::to_string(k));
    req.validate(arrivals.timeline);
    auto bad = validate_assignment(plan);
    if (not bad.empty()) throw ContractError("invalid temporal assignment: " + bad.front());

    StateStore scratch;
    StateStore &store = options.store ? *options.store : scratch;
    auto &profile = options.profile;
    auto later = plan.cross_time_edges();
    std::vector<BagRelation> out(plan.nodes.size());
    RunReport report;
    report.cost.assign(k, 0.0);
    report.times.resize(k);

    for (int t = 0; t != k; ++t) {
        auto &tr = report.times[t];
        tr.time = t;
        for (auto &n : plan.nodes) {
            if (n.time != t) continue;
            std::vector<const BagRelation*> in;
            for (auto c : n.children) {
                auto &cn = plan.nodes[c];
                in.push_back(cn.time == t ? &out[c] : &store.load(state_id(plan, c), t));
            }
            BagRelation rel;
            double factor;
            switch (n.kind) {
                case PhysKind::TableScanAt:
                case PhysKind::DeltaScanAt:
                case PhysKind::EmptyScan:
                    rel = leaf_relation(arrivals, n.op);
                    factor = n.kind == PhysKind::EmptyScan ? 0 : profile.scan;
                    break;
                case PhysKind::StateScan:
                    rel = store.load(n.op.table, t);
                    factor = profile.load;
                    break;
                case PhysKind::Exchange:
                    rel = *in.at(0);
                    factor = profile.exchange;
                    break;
                default:
                    rel = apply_operator(n.op, in);
                    factor = profile.compute;
                    if (profile.free_empty_merge and is_merge_kind(n.kind) and
                        std::ranges::any_of(in, [](auto *r) { return r->empty(); }))
                        factor = 0;
            }
            NodeRun run{ n.id, n.kind, rel.tuple_count(), factor * double(rel.tuple_count()) };
            report.cost[t] += run.cost;
            if (n.kind == PhysKind::Exchange) tr.exchanged += run.tuples;
            else if (not is_leaf_kind(n.kind)) tr.computed += run.tuples;
            if (auto it = later.find(n.id); it != later.end()) {
                if (not n.by_product) {
                    report.cost[t] += profile.save * double(run.tuples);
                    for (auto lt : it->second) report.cost[lt] += profile.load * double(run.tuples);
                }
                store.save(state_id(plan, n.id), rel, n.trait, t);
            }
            tr.nodes.push_back(run);
            if (options.keep_relations) report.relations[n.id] = rel;
            out[n.id] = std::move(rel);
        }
        if (auto it = plan.roots.find(t); it != plan.roots.end()) {
            auto &rn = plan.nodes.at(it->second);
            tr.output = rn.time == t ? out[rn.id] : store.load(state_id(plan, rn.id), t);
            auto &q = req.queries.at(t);
            if (q and options.validate) {
                auto want = evaluate_on_accumulated(*q, arrivals, t);
                bool ok = approx_equal(*tr.output, want);
                tr.oracle_match = ok;
                if (not ok)
                    throw ValidationError("output at " + arrivals.timeline.label(t) + " differs from the batch result",
                                          "got " + tr.output->to_string() + "\nexpected " + want.to_string() +
                                              "\nexcess " + bag_difference(*tr.output, want).to_string());
            }
        }
    }
    for (int t = 0; t != k; ++t) report.times[t].cost = report.cost[t];
    return report;
}

std::vector<int64_t> account_tuples(const RunReport &report, const CostProfile &profile)
{
    bool exchanges_only = profile.compute == 0 and profile.exchange > 0;
    std::vector<int64_t> out;
    for (auto &t : report.times) out.push_back(exchanges_only ? t.exchanged : t.computed);
    return out;
}

}
