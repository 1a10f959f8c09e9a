#include <tvr/memo.hpp>

#include <algorithm>
#include <sstream>
#include <tvr/errors.hpp>

namespace tvr {

namespace {

bool derives_snapshots(OpKind k)
{
    switch (k) {
        case OpKind::Filter:
        case OpKind::Project:
        case OpKind::InnerJoin:
        case OpKind::LeftOuterJoin:
        case OpKind::LeftSemiJoin:
        case OpKind::LeftAntiJoin:
        case OpKind::Aggregate:
        case OpKind::AggPartial:
        case OpKind::AggFinal:
        case OpKind::AttrMerge:
        case OpKind::Union:
            return true;
        default:
            return false;
    }
}

std::string hex(uint64_t v)
{
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

}

std::string Slot::to_string() const
{
    if (kind == Kind::Snapshot) return "Snapshot(" + std::to_string(t) + ")";
    return "Delta(" + std::to_string(t) + "," + std::to_string(t2) + ")";
}

std::string_view to_string(InterKind k)
{
    switch (k) {
        case InterKind::PositivePart: return "PositivePart";
        case InterKind::NegativePart: return "NegativePart";
        case InterKind::DirectPart: return "DirectPart";
        case InterKind::IndirectPart: return "IndirectPart";
        case InterKind::UnaffectedPart: return "UnaffectedPart";
    }
    return "?";
}

GroupId Memo::find(GroupId g) const
{
    if (g < 0 or g >= int(groups_.size())) throw ContractError("dangling group id " + std::to_string(g));
    while (groups_[g].parent != g) g = groups_[g].parent;
    return g;
}

TvrId Memo::find_tvr(TvrId t) const
{
    if (t < 0 or t >= int(tvrs_.size())) throw ContractError("dangling tvr id " + std::to_string(t));
    while (tvrs_[t].parent != t) t = tvrs_[t].parent;
    return t;
}

std::string Memo::expr_key(const std::string &signature, const std::vector<GroupId> &children) const
{
    std::string k = signature;
    k += '|';
    for (auto c : children) {
        k += std::to_string(find(c));
        k += ',';
    }
    return k;
}

std::pair<GroupId, bool> Memo::register_expr(const Operator &op, std::vector<GroupId> children, std::optional<GroupId> into)
{
    int a = arity(op.kind);
    if (a >= 0 and std::size_t(a) != children.size())
        throw ContractError(std::string(to_string(op.kind)) + " expects " + std::to_string(a) + " children");
    for (auto &c : children) c = find(c);
    if (into) into = find(*into);

    auto signature = op.signature();
    auto key = expr_key(signature, children);
    if (auto it = expr_index_.find(key); it != expr_index_.end()) {
        GroupId g = find(exprs_[it->second].group);
        if (into and *into != g) g = merge_groups(g, *into);
        return { find(g), false };
    }

    std::vector<const Schema*> schemas;
    for (auto c : children) schemas.push_back(&groups_[c].schema);
    Schema schema = output_schema(op, schemas, catalog_);

    GroupId g;
    if (into) {
        g = *into;
        if (not groups_[g].schema.compatible(schema))
            throw SchemaError("expr " + signature + " of schema " + schema.to_string() + " placed in group " +
                              std::to_string(g) + " of schema " + groups_[g].schema.to_string());
    } else {
        g = int(groups_.size());
        Group grp;
        grp.id = grp.parent = g;
        grp.schema = std::move(schema);
        groups_.push_back(std::move(grp));
    }

    GroupExpr e;
    e.id = int(exprs_.size());
    e.op = op;
    e.children = std::move(children);
    e.group = g;
    e.signature = std::move(signature);
    expr_index_.emplace(std::move(key), e.id);
    groups_[g].exprs.push_back(e.id);
    exprs_.push_back(e);
    touch();
    derive_links(g, exprs_.back());
    return { find(g), true };
}

GroupId Memo::register_tree(const LogicalNode &n, int t)
{
    if (n.op.kind == OpKind::Scan) {
        Operator op = n.op;
        op.kind = OpKind::ScanSnapshot;
        op.t = t;
        return register_expr(op, {}).first;
    }
    std::vector<GroupId> children;
    for (auto &c : n.children) children.push_back(register_tree(*c, t));
    return register_expr(n.op, std::move(children)).first;
}

void Memo::derive_links(GroupId g, const GroupExpr &e)
{
    if (e.op.kind == OpKind::ScanSnapshot) {
        register_tvr_link({ base_tvr(e.op.table), g, Slot::snapshot(e.op.t) });
        return;
    }
    if (e.op.kind == OpKind::ScanDelta) {
        register_tvr_link({ base_tvr(e.op.table), g, Slot::delta(e.op.t, e.op.t2) });
        return;
    }
    if (not derives_snapshots(e.op.kind)) return;
    auto children = e.children;
    auto signature = e.signature;
    auto agg = (e.op.kind == OpKind::AggPartial or e.op.kind == OpKind::AttrMerge) ? e.op.agg : nullptr;
    for (int t = 0; t != int(points_); ++t) {
        std::string key = signature + "(";
        bool ok = true;
        for (auto c : children) {
            auto tvrs = snapshot_tvrs(c, t);
            if (tvrs.empty()) { ok = false; break; }
            key += std::to_string(tvrs.front()) + ",";
        }
        if (not ok) continue;
        key += ")";
        TvrId tvr;
        if (auto it = derived_.find(key); it != derived_.end()) {
            tvr = find_tvr(it->second);
        } else {
            tvr = new_tvr(signature, agg);
            derived_.emplace(key, tvr);
        }
        register_tvr_link({ tvr, find(g), Slot::snapshot(t) });
    }
}

TvrId Memo::new_tvr(std::string origin, std::shared_ptr<const AggSpec> agg)
{
    TvrNode n;
    n.id = n.parent = int(tvrs_.size());
    n.agg = std::move(agg);
    n.origin = std::move(origin);
    tvrs_.push_back(std::move(n));
    touch();
    return tvrs_.back().id;
}

TvrId Memo::base_tvr(const std::string &table)
{
    auto key = "table:" + table;
    if (auto it = derived_.find(key); it != derived_.end()) return find_tvr(it->second);
    auto t = new_tvr(table);
    derived_.emplace(key, t);
    return t;
}

bool Memo::register_tvr_link(const IntraTvrEdge &e)
{
    TvrId t = find_tvr(e.tvr);
    GroupId g = find(e.group);
    if (e.slot.t < 0 or e.slot.t >= int(points_) or
        (not e.slot.is_snapshot() and (e.slot.t2 <= e.slot.t or e.slot.t2 >= int(points_))))
        throw RangeError("slot " + e.slot.to_string() + " outside timeline");
    auto &slots = tvrs_[t].slots;
    if (auto it = slots.find(e.slot); it != slots.end()) {
        GroupId old = find(it->second);
        if (old == g) return false;
        merge_groups(old, g);
        return true;
    }
    std::optional<TvrId> twin;
    if (e.slot.is_snapshot())
        for (auto &[other, s] : groups_[g].links)
            if (s == e.slot and find_tvr(other) != t) twin = find_tvr(other);
    slots.emplace(e.slot, g);
    groups_[g].links.emplace(t, e.slot);
    touch();
    if (twin) merge_tvrs(t, *twin);
    return true;
}

bool Memo::register_inter_tvr(const InterTvrEdge &e)
{
    InterTvrEdge c{ find_tvr(e.from), find_tvr(e.to), e.kind };
    if (auto existing = part(c.from, c.kind)) {
        if (*existing == c.to) return false;
        merge_tvrs(*existing, c.to);
        return true;
    }
    inter_.insert(c);
    tvrs_[c.from].parts.emplace(c.kind, c.to);
    touch();
    return true;
}

void Memo::union_groups(GroupId a, GroupId b)
{
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    auto &loser = groups_[b];
    auto &winner = groups_[a];
    loser.parent = a;
    for (auto e : loser.exprs) {
        exprs_[e].group = a;
        winner.exprs.push_back(e);
    }
    loser.exprs.clear();
    for (auto &l : loser.links) winner.links.insert(l);
    loser.links.clear();
    auto cols = winner.schema.columns();
    for (std::size_t i = 0; i != cols.size() and i != loser.schema.arity(); ++i)
        cols[i].nullable = cols[i].nullable or loser.schema[i].nullable;
    winner.schema = Schema(std::move(cols), winner.schema.key());
    touch();
}

void Memo::union_tvrs(TvrId a, TvrId b)
{
    a = find_tvr(a);
    b = find_tvr(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    auto &loser = tvrs_[b];
    auto &winner = tvrs_[a];
    loser.parent = a;
    for (auto &[s, g] : loser.slots) {
        auto [it, fresh] = winner.slots.try_emplace(s, g);
        if (not fresh and find(it->second) != find(g)) pending_groups_.emplace_back(it->second, g);
    }
    loser.slots.clear();
    for (auto &p : loser.parts) winner.parts.insert(p);
    loser.parts.clear();
    if (not winner.agg) winner.agg = loser.agg;
    touch();
}

GroupId Memo::merge_groups(GroupId a, GroupId b)
{
    if (find(a) == find(b)) return find(a);
    pending_groups_.emplace_back(a, b);
    normalize();
    return find(a);
}

void Memo::kill_expr(ExprId id)
{
    auto &e = exprs_.at(id);
    if (not e.alive) return;
    e.alive = false;
    expr_index_.erase(expr_key(e.signature, e.children));
    auto &list = groups_[find(e.group)].exprs;
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
    touch();
}

TvrId Memo::merge_tvrs(TvrId a, TvrId b)
{
    if (find_tvr(a) == find_tvr(b)) return find_tvr(a);
    pending_tvrs_.emplace_back(a, b);
    normalize();
    return find_tvr(a);
}

void Memo::normalize()
{
    if (normalizing_) return;
    normalizing_ = true;
    for (bool changed = true; changed;) {
        changed = false;
        for (auto [a, b] : std::exchange(pending_groups_, {})) {
            if (find(a) != find(b)) changed = true;
            union_groups(a, b);
        }
        for (auto [a, b] : std::exchange(pending_tvrs_, {})) {
            if (find_tvr(a) != find_tvr(b)) changed = true;
            union_tvrs(a, b);
        }
        if (not pending_groups_.empty()) { changed = true; continue; }

        // Expressions: canonical children, dedup, collisions merge groups.
        expr_index_.clear();
        for (auto &e : exprs_) {
            if (not e.alive) continue;
            for (auto &c : e.children) c = find(c);
            e.group = find(e.group);
            auto key = expr_key(e.signature, e.children);
            auto [it, fresh] = expr_index_.try_emplace(key, e.id);
            if (fresh) continue;
            auto &other = exprs_[it->second];
            if (find(other.group) != e.group) {
                pending_groups_.emplace_back(other.group, e.group);
            } else {
                e.alive = false;
                auto &list = groups_[e.group].exprs;
                list.erase(std::remove(list.begin(), list.end(), e.id), list.end());
            }
        }
        if (not pending_groups_.empty()) { changed = true; continue; }

        // TVR slots and the group links mirroring them.
        for (auto &g : groups_) g.links.clear();
        for (auto &t : tvrs_) {
            if (t.parent != t.id) continue;
            for (auto &[s, g] : t.slots) {
                g = find(g);
                groups_[g].links.emplace(t.id, s);
            }
            std::set<std::pair<InterKind, TvrId>> parts;
            for (auto [k, to] : t.parts) parts.emplace(k, find_tvr(to));
            t.parts = std::move(parts);
        }

        // Dedup: two TVRs with the same snapshot group at the same time are one TVR.
        for (auto &g : groups_) {
            if (g.parent != g.id) continue;
            std::map<int, TvrId> seen;
            for (auto &[t, s] : g.links) {
                if (not s.is_snapshot()) continue;
                auto [it, fresh] = seen.try_emplace(s.t, t);
                if (not fresh and it->second != t) pending_tvrs_.emplace_back(it->second, t);
            }
        }
        // A TVR has at most one part of each kind.
        for (auto &t : tvrs_) {
            if (t.parent != t.id) continue;
            std::map<InterKind, TvrId> seen;
            for (auto [k, to] : t.parts) {
                auto [it, fresh] = seen.try_emplace(k, to);
                if (not fresh and it->second != to) pending_tvrs_.emplace_back(it->second, to);
            }
        }
        std::set<InterTvrEdge> inter;
        for (auto &e : inter_) inter.insert({ find_tvr(e.from), find_tvr(e.to), e.kind });
        inter_ = std::move(inter);
        for (auto &[_, t] : derived_) t = find_tvr(t);
        if (not pending_tvrs_.empty()) changed = true;
    }
    normalizing_ = false;
    touch();
}

std::vector<GroupId> Memo::group_ids() const
{
    std::vector<GroupId> ids;
    for (auto &g : groups_) if (g.parent == g.id) ids.push_back(g.id);
    return ids;
}

std::vector<TvrId> Memo::tvr_ids() const
{
    std::vector<TvrId> ids;
    for (auto &t : tvrs_) if (t.parent == t.id) ids.push_back(t.id);
    return ids;
}

std::vector<ExprId> Memo::expr_ids() const
{
    std::vector<ExprId> ids;
    for (auto &e : exprs_) if (e.alive) ids.push_back(e.id);
    return ids;
}

std::vector<const GroupExpr*> Memo::exprs_of(GroupId g) const
{
    std::vector<const GroupExpr*> out;
    for (auto e : groups_[find(g)].exprs)
        if (exprs_[e].alive) out.push_back(&exprs_[e]);
    std::ranges::sort(out, {}, &GroupExpr::id);
    return out;
}

std::vector<GroupId> Memo::children_of(const GroupExpr &e) const
{
    std::vector<GroupId> c;
    for (auto g : e.children) c.push_back(find(g));
    return c;
}

std::optional<GroupId> Memo::slot(TvrId t, Slot s) const
{
    auto &slots = tvrs_[find_tvr(t)].slots;
    auto it = slots.find(s);
    if (it == slots.end()) return std::nullopt;
    return find(it->second);
}

std::optional<TvrId> Memo::part(TvrId t, InterKind kind) const
{
    for (auto [k, to] : tvrs_[find_tvr(t)].parts)
        if (k == kind) return find_tvr(to);
    return std::nullopt;
}

std::optional<GroupId> Memo::resolve(TvrId t, const std::vector<InterKind> &path, Slot s) const
{
    for (auto k : path) {
        auto next = part(t, k);
        if (not next) return std::nullopt;
        t = *next;
    }
    return slot(t, s);
}

std::vector<TvrId> Memo::snapshot_tvrs(GroupId g, int t) const
{
    std::vector<TvrId> out;
    for (auto &[tvr, s] : groups_[find(g)].links)
        if (s.is_snapshot() and s.t == t) {
            auto c = find_tvr(tvr);
            if (std::ranges::find(out, c) == out.end()) out.push_back(c);
        }
    std::ranges::sort(out);
    return out;
}

std::string Memo::dump() const
{
    std::ostringstream os;
    for (auto g : group_ids()) {
        os << "G" << g << " " << groups_[g].schema.to_string() << "\n";
        for (auto e : exprs_of(g)) {
            os << "  " << e->signature;
            if (not e->children.empty()) {
                os << " [";
                auto c = children_of(*e);
                for (std::size_t i = 0; i != c.size(); ++i) os << (i ? ", " : "") << "G" << c[i];
                os << "]";
            }
            os << "\n";
        }
    }
    for (auto t : tvr_ids()) {
        auto &n = tvrs_[t];
        os << "TVR-" << t << " " << n.origin << (n.agg ? " attribute" : "") << "\n";
        for (auto &[s, g] : n.slots) os << "  " << s.to_string() << " = G" << find(g) << "\n";
        for (auto [k, to] : n.parts) os << "  " << to_string(k) << " -> TVR-" << find_tvr(to) << "\n";
    }
    return os.str();
}

std::string Memo::canonical_dump() const
{
    constexpr uint64_t UNSET = ~uint64_t(0);
    std::map<GroupId, uint64_t> label;
    auto ids = group_ids();
    for (auto g : ids) label[g] = UNSET;
    std::hash<std::string> h;
    auto expr_text = [&](const GroupExpr &e) -> std::optional<std::string> {
        std::string s = e.signature + "[";
        for (auto c : children_of(e)) {
            if (label[c] == UNSET) return std::nullopt;
            s += hex(label[c]) + ",";
        }
        return s + "]";
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (auto g : ids)
            for (auto e : exprs_of(g))
                if (auto s = expr_text(*e)) {
                    auto v = h(*s) & (UNSET >> 1);
                    if (v < label[g]) {
                        label[g] = v;
                        changed = true;
                    }
                }
    }
    std::vector<std::string> lines;
    for (auto g : ids) {
        std::vector<std::string> es;
        for (auto e : exprs_of(g)) es.push_back(expr_text(*e).value_or("<ungrounded>"));
        std::ranges::sort(es);
        std::string line = "group " + hex(label[g]) + ":";
        for (auto &s : es) line += " " + s;
        lines.push_back(line);
    }
    auto describe = [&](TvrId t) {
        auto &n = tvrs_[find_tvr(t)];
        std::string s = n.agg ? "attr{" : "{";
        for (auto &[slot, g] : n.slots) s += slot.to_string() + "=" + hex(label[find(g)]) + " ";
        return s + "}";
    };
    for (auto t : tvr_ids()) {
        std::string line = "tvr " + describe(t);
        std::vector<std::string> parts;
        for (auto [k, to] : tvrs_[t].parts) parts.push_back(std::string(to_string(k)) + "->" + describe(to));
        std::ranges::sort(parts);
        for (auto &p : parts) line += " " + p;
        lines.push_back(line);
    }
    std::ranges::sort(lines);
    std::string out;
    for (auto &l : lines) out += l + "\n";
    return out;
}

std::string Memo::check_invariants() const
{
    std::set<std::string> keys;
    for (auto &e : exprs_) {
        if (not e.alive) continue;
        if (find(e.group) != e.group and groups_[e.group].parent == e.group) return "expr group not canonical";
        auto g = find(e.group);
        if (std::ranges::find(groups_[g].exprs, e.id) == groups_[g].exprs.end())
            return "expr E" + std::to_string(e.id) + " missing from its group";
        if (not keys.insert(expr_key(e.signature, children_of(e))).second)
            return "duplicate expr " + e.signature;
    }
    for (auto t : tvr_ids()) {
        for (auto &[s, g] : tvrs_[t].slots) {
            auto c = find(g);
            if (not groups_[c].links.contains({ t, s })) return "slot " + s.to_string() + " not mirrored in group";
            if (not s.is_snapshot() and s.t2 <= s.t) return "bad delta slot";
        }
        for (auto [k, to] : tvrs_[t].parts)
            if (find_tvr(to) != to) return "part edge to non-canonical tvr";
    }
    for (auto g : group_ids())
        for (auto &[t, s] : groups_[g].links) {
            if (find_tvr(t) != t) return "group link to non-canonical tvr";
            auto it = tvrs_[t].slots.find(s);
            if (it == tvrs_[t].slots.end() or find(it->second) != g) return "group link without slot";
        }
    return {};
}

void GroupEvaluator::refresh()
{
    if (version_ == memo_.version()) return;
    version_ = memo_.version();
    std::map<GroupId, BagRelation> cache;
    for (auto &[g, r] : cache_) cache.try_emplace(memo_.find(g), std::move(r));
    cache_ = std::move(cache);

    constexpr int INF = 1 << 30;
    std::map<GroupId, int> rank;
    representative_.clear();
    auto ids = memo_.group_ids();
    for (auto g : ids) rank[g] = INF;
    for (bool changed = true; changed;) {
        changed = false;
        for (auto g : ids)
            for (auto e : memo_.exprs_of(g)) {
                int r = 0;
                for (auto c : memo_.children_of(*e)) r = std::max(r, rank[c] == INF ? INF : rank[c] + 1);
                if (r < rank[g]) {
                    rank[g] = r;
                    representative_[g] = e->id;
                    changed = true;
                }
            }
    }
}

std::optional<ExprId> GroupEvaluator::representative(GroupId g)
{
    refresh();
    auto it = representative_.find(memo_.find(g));
    if (it == representative_.end()) return std::nullopt;
    return it->second;
}

BagRelation GroupEvaluator::evaluate(const GroupExpr &e)
{
    if (is_leaf(e.op.kind)) return leaf_(e.op);
    std::vector<const BagRelation*> inputs;
    for (auto c : memo_.children_of(e)) inputs.push_back(&relation(c));
    return apply_operator(e.op, inputs);
}

const BagRelation & GroupEvaluator::relation(GroupId g)
{
    refresh();
    g = memo_.find(g);
    if (auto it = cache_.find(g); it != cache_.end()) return it->second;
    auto rep = representative(g);
    if (not rep) throw StatsError("group G" + std::to_string(g) + " has no grounded derivation");
    auto value = evaluate(memo_.expr(*rep));
    return cache_.emplace(g, std::move(value)).first->second;
}

}
