#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <tvr/errors.hpp>
#include <tvr/search.hpp>

namespace tvr {

std::string Candidate::to_string() const { return "<C" + std::to_string(cls) + ",t" + std::to_string(time) + ">"; }

namespace {

using Val = std::optional<CostVector>;

struct Pick
{
    int alt = -1;
    int time = -1;
};

/// Relaxation over (class, alt, time).  Alt indices past a class's real alts are its shared loads, one per time in
/// `shared[c]`.
class Dp
{
    public:
    const PlanSpace &s;
    const CostFunction &f;
    int k;
    std::vector<std::vector<int>> shared;
    /// Shared states not readable at their own time (to price a state whose producer would read itself).
    std::set<Candidate> late_only;
    std::vector<std::vector<std::vector<Val>>> altv;
    std::vector<std::vector<std::vector<std::vector<Pick>>>> picks;
    mutable std::map<Candidate, std::shared_ptr<const Dp>> restricted;

    Dp(const PlanSpace &space, const CostFunction &fn, const std::set<Candidate> &states, std::set<Candidate> late = {})
        : s(space), f(fn), k(space.points), shared(space.classes.size()), late_only(std::move(late))
    {
        if (f.kind == CostFunction::Kind::WeightedSum and f.weights.size() != std::size_t(k))
            throw ContractError("cost function has " + std::to_string(f.weights.size()) + " weights for " +
                                std::to_string(k) + " points");
        altv.resize(s.classes.size());
        picks.resize(s.classes.size());
        for (std::size_t c = 0; c != s.classes.size(); ++c) {
            altv[c].assign(s.classes[c].alts.size(), std::vector<Val>(k));
            picks[c].assign(s.classes[c].alts.size(), std::vector<std::vector<Pick>>(k));
        }
        for (auto &c : states) push_shared(c);
        run();
    }

    void push_shared(const Candidate &c)
    {
        if (c.cls < 0 or std::size_t(c.cls) >= s.classes.size() or c.time < 0 or c.time >= k)
            throw ContractError("bad candidate " + c.to_string());
        shared[c.cls].push_back(c.time);
        altv[c.cls].emplace_back(k);
        picks[c.cls].emplace_back(k);
        for (int t = c.time + (late_only.contains(c) ? 1 : 0); t < k; ++t) {
            CostVector v(k, 0.0);
            if (t > c.time and not persisted(c.cls)) v[t] += s.classes[c.cls].load_cost;
            altv[c.cls].back()[t] = v;
        }
    }

    /// Adds one shared state and relaxes from the current values, which remain upper bounds.
    void add_shared(const Candidate &c)
    {
        restricted.clear();
        push_shared(c);
        run();
    }

    std::set<Candidate> states() const
    {
        std::set<Candidate> out;
        for (std::size_t c = 0; c != shared.size(); ++c)
            for (auto t : shared[c]) out.insert({ int(c), t });
        return out;
    }

    bool real(int c, int a) const { return std::size_t(a) < s.classes[c].alts.size(); }
    Candidate state_of(int c, int a) const { return { c, shared[c][a - s.classes[c].alts.size()] }; }

    /// Outputs of a class whose every alternative is a by-product stay available for free.
    bool persisted(int c) const
    {
        auto &alts = s.classes[c].alts;
        return not alts.empty() and std::ranges::all_of(alts, [](auto &a) { return a.by_product; });
    }

    bool better(const CostVector &a, const Val &b) const { return not b or f.less(a, *b); }

    double transfer_save(int c, int a) const { return s.classes[c].alts[a].by_product ? 0 : s.classes[c].save_cost; }
    double transfer_load(int c, int a) const { return s.classes[c].alts[a].by_product ? 0 : s.classes[c].load_cost; }

    /// Cheapest way to have class `c` available to a consumer running at `t`.
    std::pair<Val, Pick> input(int c, int t) const
    {
        Val best;
        Pick pick;
        for (std::size_t a = 0; a != altv[c].size(); ++a)
            if (auto &v = altv[c][a][t]; v and better(*v, best)) {
                best = v;
                pick = { int(a), t };
            }
        for (int tc = t - 1; tc >= 0; --tc)
            for (std::size_t a = 0; a != s.classes[c].alts.size(); ++a) {
                auto &v = altv[c][a][tc];
                if (not v) continue;
                CostVector w = *v;
                w[tc] += transfer_save(c, int(a));
                w[t] += transfer_load(c, int(a));
                if (better(w, best)) {
                    best = w;
                    pick = { int(a), tc };
                }
            }
        return { best, pick };
    }

    void run()
    {
        bool changed = true;
        std::size_t guard = 0;
        while (changed) {
            changed = false;
            if (++guard > 10000) throw ContractError("plan search did not converge");
            for (int c = int(s.classes.size()) - 1; c >= 0; --c) {
                auto &cls = s.classes[c];
                for (std::size_t a = 0; a != cls.alts.size(); ++a) {
                    auto &alt = cls.alts[a];
                    for (int t = std::max(0, alt.available); t < k; ++t) {
                        CostVector v(k, 0.0);
                        v[t] = alt.cost.at(t);
                        std::vector<Pick> p;
                        bool ok = true;
                        for (auto ch : alt.children) {
                            auto [iv, pk] = input(ch, t);
                            if (not iv) {
                                ok = false;
                                break;
                            }
                            v = add(std::move(v), *iv);
                            p.push_back(pk);
                        }
                        if (ok and better(v, altv[c][a][t])) {
                            altv[c][a][t] = v;
                            picks[c][a][t] = std::move(p);
                            changed = true;
                        }
                    }
                }
            }
        }
    }

    /// Best real alternative at `t`.
    std::pair<Val, int> produce(int c, int t) const
    {
        Val best;
        int arg = -1;
        for (std::size_t a = 0; a != s.classes[c].alts.size(); ++a)
            if (auto &v = altv[c][a][t]; v and better(*v, best)) {
                best = v;
                arg = int(a);
            }
        return { best, arg };
    }

    std::pair<Val, int> deliver(int c, int t) const
    {
        Val best;
        int arg = -1;
        for (std::size_t a = 0; a != altv[c].size(); ++a)
            if (auto &v = altv[c][a][t]; v and better(*v, best)) {
                best = v;
                arg = int(a);
            }
        return { best, arg };
    }

    /// Whether the derivation of (c, a, t) reads shared state `st`.
    bool reads(int c, int a, int t, const Candidate &st, std::set<std::tuple<int, int, int>> &seen) const
    {
        if (not real(c, a)) return state_of(c, a) == st;
        if (not seen.insert({ c, a, t }).second) return false;
        auto &alt = s.classes[c].alts[a];
        for (std::size_t i = 0; i != alt.children.size(); ++i) {
            auto pk = picks[c][a][t].at(i);
            if (reads(alt.children[i], pk.alt, pk.time, st, seen)) return true;
        }
        return false;
    }

    /// The table that prices the production of `st`: this one, unless its best producer reads `st` itself.
    const Dp & producer_table(const Candidate &st) const
    {
        auto a = produce(st.cls, st.time).second;
        if (a < 0) return *this;
        std::set<std::tuple<int, int, int>> seen;
        if (not reads(st.cls, a, st.time, st, seen)) return *this;
        auto &slot = restricted[st];
        if (not slot) {
            auto late = late_only;
            late.insert(st);
            slot = std::make_shared<const Dp>(s, f, states(), std::move(late));
        }
        return *slot;
    }

    /// Roots plus one production (and Save) per shared state; nullopt if anything is undeliverable.
    Val objective() const
    {
        CostVector total(k, 0.0);
        for (auto &[t, r] : s.roots) {
            auto [v, a] = deliver(r, t);
            if (not v) return std::nullopt;
            total = add(std::move(total), *v);
        }
        for (auto &st : states()) {
            auto [v, a] = producer_table(st).produce(st.cls, st.time);
            if (not v) return std::nullopt;
            total = add(std::move(total), *v);
            total[st.time] += transfer_save(st.cls, a);
        }
        return total;
    }

    /// Nodes reachable from the roots.  Throws ContractError if shared states depend on each other in a cycle.
    TimedPlan extract() const
    {
        TimedPlan plan;
        plan.points = k;
        std::map<std::tuple<int, int, int>, int> made;
        std::set<std::tuple<int, int, int>> active;
        std::function<int(const Dp&, int, int, int)> build = [&](const Dp &dp, int c, int a, int t) -> int {
            const Dp *table = &dp;
            bool is_shared = false;
            if (not dp.real(c, a)) {
                auto st = dp.state_of(c, a);
                table = &dp.producer_table(st);
                t = st.time;
                a = table->produce(c, t).second;
                is_shared = true;
            }
            auto key = std::tuple{ c, a, t };
            if (auto it = made.find(key); it != made.end()) {
                if (is_shared) plan.materialized.insert(it->second);
                return it->second;
            }
            if (not active.insert(key).second)
                throw ContractError("shared state C" + std::to_string(c) + " feeds itself");
            auto &cls = s.classes[c];
            auto &alt = cls.alts[a];
            PlanNode n;
            for (std::size_t i = 0; i != alt.children.size(); ++i) {
                auto pk = table->picks[c][a][t].at(i);
                n.children.push_back(build(*table, alt.children[i], pk.alt, pk.time));
            }
            active.erase(key);
            n.id = int(plan.nodes.size());
            n.cls = c;
            n.group = cls.group;
            n.trait = cls.trait;
            n.kind = alt.kind;
            n.op = alt.op;
            n.time = t;
            n.by_product = alt.by_product;
            n.cardinality = cls.cardinality;
            n.cost = alt.cost.at(t);
            n.save_cost = cls.save_cost;
            n.load_cost = cls.load_cost;
            plan.nodes.push_back(std::move(n));
            made[key] = plan.nodes.back().id;
            if (is_shared) plan.materialized.insert(plan.nodes.back().id);
            return plan.nodes.back().id;
        };
        for (auto &[t, r] : s.roots) {
            auto [v, a] = deliver(r, t);
            if (not v) throw UnplannableError("no plan delivers the output at time " + std::to_string(t));
            plan.roots[t] = build(*this, r, a, t);
        }
        plan.cost = plan_cost(plan);
        plan.objective = *objective();
        return plan;
    }
};

}

TimedPlan dp_search(const PlanSpace &space, const CostFunction &f, const std::set<Candidate> &shared)
{
    Dp dp(space, f, shared);
    if (not dp.objective()) throw UnplannableError("no plan delivers every required output");
    return dp.extract();
}

CostVector dp_objective(const PlanSpace &space, const CostFunction &f, const std::set<Candidate> &shared)
{
    Dp dp(space, f, shared);
    auto v = dp.objective();
    if (not v) throw UnplannableError("no plan delivers every required output");
    return *v;
}

namespace {

struct Tree
{
    int cls = -1;
    int alt = -1;
    int time = 0;
    std::vector<std::shared_ptr<const Tree>> kids;
};

using TreeSet = std::map<CostVector, std::shared_ptr<const Tree>>;
/// Trees computed at one time, keyed also by whether the output persists for free.
using RootedSet = std::map<std::pair<bool, CostVector>, std::shared_ptr<const Tree>>;

class Enumerator
{
    const PlanSpace &s;
    int k;
    std::size_t limit;
    std::size_t built = 0;
    std::set<std::tuple<int, int, int>> path;

    void charge(std::size_t n)
    {
        built += n;
        if (built > limit) throw RangeError("exhaustive search exceeded " + std::to_string(limit) + " partial plans");
    }

    public:
    Enumerator(const PlanSpace &space, std::size_t lim) : s(space), k(space.points), limit(lim) {}

    /// Every tree computing class `c` at `t`.
    RootedSet at(int c, int t)
    {
        RootedSet out;
        auto &cls = s.classes[c];
        for (std::size_t a = 0; a != cls.alts.size(); ++a) {
            auto &alt = cls.alts[a];
            if (t < alt.available or not path.insert({ c, int(a), t }).second) continue;
            CostVector base(k, 0.0);
            base[t] = alt.cost.at(t);
            std::vector<std::pair<CostVector, std::vector<std::shared_ptr<const Tree>>>> partial{ { base, {} } };
            for (auto ch : alt.children) {
                auto in = delivered(ch, t);
                std::map<CostVector, std::vector<std::shared_ptr<const Tree>>> next;
                for (auto &[pv, pk] : partial)
                    for (auto &[cv, ct] : in) {
                        auto v = add(pv, cv);
                        if (next.contains(v)) continue;
                        auto kids = pk;
                        kids.push_back(ct);
                        next.emplace(std::move(v), std::move(kids));
                    }
                charge(next.size());
                partial.assign(next.begin(), next.end());
                if (partial.empty()) break;
            }
            path.erase({ c, int(a), t });
            for (auto &[v, kids] : partial)
                out.try_emplace({ alt.by_product, v }, std::make_shared<Tree>(Tree{ c, int(a), t, kids }));
        }
        return out;
    }

    /// Every tree making class `c` available at `t`: computed at t, or earlier and carried forward.
    TreeSet delivered(int c, int t)
    {
        TreeSet out;
        auto &cls = s.classes[c];
        for (int tc = 0; tc <= t; ++tc)
            for (auto &[key, tree] : at(c, tc)) {
                CostVector w = key.second;
                if (tc < t and not key.first) {
                    w[tc] += cls.save_cost;
                    w[t] += cls.load_cost;
                }
                out.emplace(std::move(w), tree);
            }
        return out;
    }
};

}

TimedPlan exhaustive_search(const PlanSpace &space, const CostFunction &f, std::size_t limit)
{
    Enumerator en(space, limit);
    TimedPlan plan;
    plan.points = space.points;
    plan.objective.assign(space.points, 0.0);
    std::map<std::tuple<int, int, int>, int> made;
    std::function<int(const Tree&)> build = [&](const Tree &t) -> int {
        auto key = std::tuple{ t.cls, t.alt, t.time };
        if (auto it = made.find(key); it != made.end()) return it->second;
        PlanNode n;
        for (auto &kid : t.kids) n.children.push_back(build(*kid));
        auto &cls = space.classes[t.cls];
        auto &alt = cls.alts[t.alt];
        n.id = int(plan.nodes.size());
        n.cls = t.cls;
        n.group = cls.group;
        n.trait = cls.trait;
        n.kind = alt.kind;
        n.op = alt.op;
        n.time = t.time;
        n.by_product = alt.by_product;
        n.cardinality = cls.cardinality;
        n.cost = alt.cost.at(t.time);
        n.save_cost = cls.save_cost;
        n.load_cost = cls.load_cost;
        plan.nodes.push_back(std::move(n));
        return made[key] = plan.nodes.back().id;
    };
    for (auto &[t, r] : space.roots) {
        auto trees = en.at(r, t);
        const CostVector *best = nullptr;
        const Tree *tree = nullptr;
        for (auto &[key, tr] : trees)
            if (not best or f.less(key.second, *best)) {
                best = &key.second;
                tree = tr.get();
            }
        if (not best) throw UnplannableError("no plan delivers the output at time " + std::to_string(t));
        plan.objective = add(std::move(plan.objective), *best);
        plan.roots[t] = build(*tree);
    }
    plan.cost = plan_cost(plan);
    return plan;
}

std::vector<Candidate> share_candidates(const PlanSpace &space)
{
    std::map<ClassId, int> refs;
    for (auto &c : space.classes)
        for (auto &a : c.alts)
            for (auto ch : std::set<ClassId>(a.children.begin(), a.children.end())) ++refs[ch];
    Dp dp(space, space.points == 0 ? CostFunction::uniform(0) : CostFunction::uniform(space.points), {});
    std::vector<Candidate> out;
    for (auto &[c, n] : refs) {
        if (n < 2) continue;
        for (int t = 0; t != space.points; ++t)
            if (dp.produce(c, t).first) out.push_back({ c, t });
    }
    return out;
}

std::vector<Candidate> store_early_reduction(const std::vector<Candidate> &candidates, const CostFunction &f)
{
    if (f.kind != CostFunction::Kind::WeightedSum or not f.increasing()) return candidates;
    std::map<ClassId, int> earliest;
    for (auto &c : candidates) {
        auto [it, fresh] = earliest.try_emplace(c.cls, c.time);
        if (not fresh) it->second = std::min(it->second, c.time);
    }
    std::vector<Candidate> out;
    for (auto &c : candidates)
        if (earliest[c.cls] == c.time) out.push_back(c);
    return out;
}

TimedPlan greedy_mqo(const PlanSpace &space, const CostFunction &f, bool store_early, MqoTrace *trace)
{
    auto candidates = share_candidates(space);
    if (store_early) candidates = store_early_reduction(candidates, f);
    std::set<Candidate> chosen;
    CostVector current = dp_objective(space, f, chosen);
    MqoTrace local;
    local.initial = current;
    local.candidates = candidates.size();
    auto best_set = chosen;
    auto best_value = current;
    std::set<Candidate> banned;
    auto accept = [&](const Candidate &c) {
        auto trial = chosen;
        trial.insert(c);
        try {
            Dp(space, f, trial).extract();
        } catch (const ContractError&) {
            banned.insert(c);
            return false;
        }
        chosen = std::move(trial);
        return true;
    };
    auto note = [&](const Candidate &c, const CostVector &v) {
        current = v;
        local.steps.push_back({ c, current });
        if (f.less(current, best_value)) {
            best_value = current;
            best_set = chosen;
        }
    };
    while (true) {
        std::optional<Candidate> pick;
        CostVector pick_value;
        std::optional<Dp> base(std::in_place, space, f, chosen);
        for (auto &c : candidates) {
            if (chosen.contains(c) or banned.contains(c)) continue;
            ++local.evaluated;
            Dp dp = *base;
            dp.add_shared(c);
            auto v = dp.objective();
            if (v and f.less(*v, pick ? pick_value : current)) {
                pick = c;
                pick_value = *v;
            }
        }
        if (pick) {
            if (accept(*pick)) note(*pick, pick_value);
            continue;
        }
        // no strict improvement: sweep once, keeping every state that costs nothing, since a free shared state can
        // enable later improvements
        bool moved = false, improved = false;
        for (auto &c : candidates) {
            if (chosen.contains(c) or banned.contains(c)) continue;
            ++local.evaluated;
            Dp dp = *base;
            dp.add_shared(c);
            auto v = dp.objective();
            if (not v or f.less(current, *v) or not accept(c)) continue;
            moved = true;
            improved = f.less(*v, current);
            note(c, *v);
            if (improved) break;
            base.emplace(space, f, chosen);
        }
        if (not moved) break;
    }
    chosen = best_set;
    // drop states whose removal does not cost anything
    for (bool changed = true; changed;) {
        changed = false;
        for (auto it = chosen.rbegin(); it != chosen.rend();) {
            auto trial = chosen;
            trial.erase(*it);
            Dp dp(space, f, trial);
            auto v = dp.objective();
            bool ok = v and not f.less(best_value, *v);
            if (ok) {
                try {
                    dp.extract();
                } catch (const ContractError&) {
                    ok = false;
                }
            }
            if (ok) {
                best_value = *v;
                auto next = std::next(it);
                auto key = next == chosen.rend() ? std::optional<Candidate>() : std::optional<Candidate>(*next);
                chosen = std::move(trial);
                changed = true;
                it = key ? std::make_reverse_iterator(std::next(chosen.find(*key))) : chosen.rend();
            } else {
                ++it;
            }
        }
    }
    if (trace) *trace = local;
    return dp_search(space, f, chosen);
}

}
