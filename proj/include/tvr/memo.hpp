#pragma once

#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tvr/algebra.hpp>
#include <unordered_map>
#include <vector>

namespace tvr {

using GroupId = int;
using ExprId = int;
using TvrId = int;

/// Position of a group inside a TVR: its snapshot at `t`, or its delta over (`t`, `t2`).
struct Slot
{
    enum class Kind { Snapshot, Delta };

    Kind kind = Kind::Snapshot;
    int t = 0;
    int t2 = -1;

    static Slot snapshot(int t) { return { Kind::Snapshot, t, -1 }; }
    static Slot delta(int t, int t2) { return { Kind::Delta, t, t2 }; }
    bool is_snapshot() const { return kind == Kind::Snapshot; }
    auto operator<=>(const Slot&) const = default;
    std::string to_string() const;
};

enum class InterKind { PositivePart, NegativePart, DirectPart, IndirectPart, UnaffectedPart };
std::string_view to_string(InterKind k);

struct IntraTvrEdge
{
    TvrId tvr;
    GroupId group;
    Slot slot;
};

struct InterTvrEdge
{
    TvrId from;
    TvrId to;
    InterKind kind;
    auto operator<=>(const InterTvrEdge&) const = default;
};

struct GroupExpr
{
    ExprId id = -1;
    Operator op;
    std::vector<GroupId> children;
    GroupId group = -1;
    std::string signature;
    bool alive = true;
};

struct Group
{
    GroupId id = -1;
    GroupId parent = -1;
    std::vector<ExprId> exprs;
    Schema schema;
    /// (tvr, slot) pairs this group occupies.
    std::set<std::pair<TvrId, Slot>> links;
};

struct TvrNode
{
    TvrId id = -1;
    TvrId parent = -1;
    std::map<Slot, GroupId> slots;
    /// Aggregate whose state this TVR holds (attribute perspective); null for the multiplicity perspective.
    std::shared_ptr<const AggSpec> agg;
    std::set<std::pair<InterKind, TvrId>> parts;
    /// Human-readable origin, e.g. the base table or the defining operator.
    std::string origin;

    bool attribute() const { return agg != nullptr; }
    MergeOperator merge_operator() const { return agg ? agg->merge_operator() : MergeOperator::multiplicity(); }
};

/// The memo: groups of equivalent expressions plus TVR nodes recording which group is which snapshot or delta of
/// which time-varying relation, and how TVRs decompose into parts.
class Memo
{
    Catalog catalog_;
    std::size_t points_;
    std::vector<Group> groups_;
    std::vector<GroupExpr> exprs_;
    std::vector<TvrNode> tvrs_;
    std::unordered_map<std::string, ExprId> expr_index_;
    std::map<std::string, TvrId> derived_;
    std::set<InterTvrEdge> inter_;
    uint64_t version_ = 0;
    bool normalizing_ = false;
    std::vector<std::pair<GroupId, GroupId>> pending_groups_;
    std::vector<std::pair<TvrId, TvrId>> pending_tvrs_;

    public:
    Memo(Catalog catalog, std::size_t points) : catalog_(std::move(catalog)), points_(points) { }

    const Catalog & catalog() const { return catalog_; }
    std::size_t points() const { return points_; }
    int last() const { return int(points_) - 1; }
    /// Bumped on every structural change.
    uint64_t version() const { return version_; }

    /// Registers `op` over `children`, deduplicating.  With `into`, the expr is placed in that group (merging
    /// groups if it already lives elsewhere).  Snapshot links of the children propagate to the new group through the
    /// TVR derived by `op`.
    std::pair<GroupId, bool> register_expr(const Operator &op, std::vector<GroupId> children,
                                           std::optional<GroupId> into = std::nullopt);
    /// Registers a query tree bottom-up with scans resolved to snapshots at `t`.
    GroupId register_tree(const LogicalNode &n, int t);

    TvrId new_tvr(std::string origin, std::shared_ptr<const AggSpec> agg = nullptr);
    /// TVR of a base table, created on first use.
    TvrId base_tvr(const std::string &table);
    /// Links `group` into `slot` of `tvr`.  A different group already in that slot is merged with `group`.
    bool register_tvr_link(const IntraTvrEdge &e);
    bool register_inter_tvr(const InterTvrEdge &e);

    GroupId merge_groups(GroupId a, GroupId b);
    /// Removes an expr from its group (pruning).  A later registration of the same expr revives it.
    void kill_expr(ExprId e);
    TvrId merge_tvrs(TvrId a, TvrId b);

    GroupId find(GroupId g) const;
    TvrId find_tvr(TvrId t) const;
    const Group & group(GroupId g) const { return groups_[find(g)]; }
    const GroupExpr & expr(ExprId e) const { return exprs_[e]; }
    const TvrNode & tvr(TvrId t) const { return tvrs_[find_tvr(t)]; }
    std::vector<GroupId> group_ids() const;
    std::vector<TvrId> tvr_ids() const;
    std::vector<ExprId> expr_ids() const;
    std::size_t group_count() const { return group_ids().size(); }
    std::size_t expr_count() const { return expr_ids().size(); }
    /// Live exprs of `g` with canonical children.
    std::vector<const GroupExpr*> exprs_of(GroupId g) const;
    std::vector<GroupId> children_of(const GroupExpr &e) const;

    std::optional<GroupId> slot(TvrId t, Slot s) const;
    /// Target of the `kind` part edge of `t`.
    std::optional<TvrId> part(TvrId t, InterKind kind) const;
    /// Follows `path` of part edges from `t`, then looks up `s`.
    std::optional<GroupId> resolve(TvrId t, const std::vector<InterKind> &path, Slot s) const;
    /// TVRs in which `g` is the snapshot at `t`.
    std::vector<TvrId> snapshot_tvrs(GroupId g, int t) const;
    const std::set<InterTvrEdge> & inter_edges() const { return inter_; }

    /// Deterministic dump, sorted by id.
    std::string dump() const;
    /// Order-independent dump: groups are named by a structural hash instead of their ids.
    std::string canonical_dump() const;
    /// Checks the structural invariants; returns a description of the first violation or an empty string.
    std::string check_invariants() const;

    private:
    std::string expr_key(const std::string &signature, const std::vector<GroupId> &children) const;
    void derive_links(GroupId g, const GroupExpr &e);
    void touch() { ++version_; }
    void normalize();
    void union_groups(GroupId a, GroupId b);
    void union_tvrs(TvrId a, TvrId b);
};

/// Evaluates groups on concrete data through their shallowest derivation.  Leaves are resolved by `leaf`.
class GroupEvaluator
{
    const Memo &memo_;
    std::function<BagRelation(const Operator&)> leaf_;
    std::map<GroupId, BagRelation> cache_;
    std::map<GroupId, ExprId> representative_;
    uint64_t version_ = ~uint64_t(0);

    public:
    GroupEvaluator(const Memo &memo, std::function<BagRelation(const Operator&)> leaf)
        : memo_(memo), leaf_(std::move(leaf)) { }

    const BagRelation & relation(GroupId g);
    /// Evaluates one specific expr of a group.
    BagRelation evaluate(const GroupExpr &e);
    /// The expr used to evaluate `g`; none if `g` has no grounded derivation.
    std::optional<ExprId> representative(GroupId g);

    private:
    void refresh();
};

}
