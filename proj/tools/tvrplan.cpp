#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <tvr/errors.hpp>
#include <tvr/session.hpp>

using namespace tvr;

namespace {

struct Common
{
    std::string session;
    std::string rules;
    std::string cost;
    std::string profile;
    int seed_interval = 0;
    bool no_translation_copy = false;
    bool no_share = false;
    bool exhaustive_check = false;
};

void add_common(CLI::App *cmd, Common &c)
{
    cmd->add_option("session", c.session, "Session JSON file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--rules", c.rules, "Rule families, e.g. im1,im2 or all (overrides the session)");
    cmd->add_option("--cost", c.cost, "Cost function: comma separated weights or reverse_lexical");
    cmd->add_option("--profile", c.profile, "Cost profile: output or shuffle");
    cmd->add_option("--seed-interval", c.seed_interval, "Also seed deltas of this many points");
    cmd->add_flag("--no-translation-copy", c.no_translation_copy, "Do not copy the query into each delta slot");
    cmd->add_flag("--no-share", c.no_share, "Skip multi-query sharing");
    cmd->add_flag("--exhaustive-check", c.exhaustive_check, "Cross-check the search against enumeration");
}

CostFunction parse_cost(const std::string &s, std::size_t points)
{
    if (s == "reverse_lexical" or s == "reverse-lexical") return CostFunction::reverse_lexical();
    if (s == "uniform") return CostFunction::uniform(points);
    std::vector<double> w;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            w.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ParseError("--cost: '" + item + "' is not a number");
        }
    }
    if (w.size() != points)
        throw ParseError("--cost: " + std::to_string(w.size()) + " weights for " + std::to_string(points) + " points");
    return CostFunction::weighted(w);
}

Session open(const Common &c, PlanOptions &options)
{
    auto s = load_session(c.session);
    if (not c.cost.empty()) s.cost = parse_cost(c.cost, s.arrivals.timeline.size());
    if (not c.profile.empty()) s.profile = CostProfile::by_name(c.profile);
    if (not c.rules.empty()) s.rules = RuleFamilies::parse(c.rules);
    options.translation_copy = not c.no_translation_copy;
    options.seed_interval = c.seed_interval;
    options.share = not c.no_share;
    options.exhaustive_check = c.exhaustive_check;
    return s;
}

std::string vec(const CostVector &v)
{
    std::ostringstream o;
    o << "(";
    for (std::size_t i = 0; i != v.size(); ++i) o << (i ? ", " : "") << v[i];
    return o.str() + ")";
}

std::string summary(const Session &s, const PlanResult &r)
{
    std::ostringstream o;
    auto &st = r.exploration.stats;
    o << "session " << s.name << ": " << s.arrivals.timeline.size() << " points, rules " << s.rules.to_string()
      << ", profile " << s.profile.name << ", " << s.cost.to_string() << "\n";
    o << "memo: " << r.exploration.memo.group_count() << " groups, " << r.exploration.memo.expr_count() << " exprs, "
      << st.rounds << " rounds, " << st.firings << " firings" << (st.partial_exploration ? " (partial)" : "") << "\n";
    o << "plan space: " << r.space.classes.size() << " classes\n";
    o << "no-sharing objective " << vec(r.unshared.objective) << " = " << reduce_cost(r.unshared.objective, s.cost)
      << "\n";
    if (not r.trace.steps.empty() or r.trace.candidates) {
        o << "sharing: " << r.trace.candidates << " candidates, " << r.trace.evaluated << " evaluations, "
          << r.trace.steps.size() << " steps, " << r.plan.materialized.size() << " shared nodes in the plan\n";
    }
    o << "plan cost " << vec(r.plan.cost) << " = " << reduce_cost(r.plan.cost, s.cost) << "\n";
    if (r.exhaustive_agrees) o << "exhaustive check: " << (*r.exhaustive_agrees ? "agrees" : "DISAGREES") << "\n";
    return o.str();
}

void write(const std::string &path, const std::string &text)
{
    if (path.empty() or path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (not out) throw StateError("cannot write " + path);
    out << text;
}

}

int main(int argc, char **argv)
{
    CLI::App app{ "Incremental query planner over time-varying relations" };
    app.require_subcommand(1);
    Common common;
    std::string output, plan_file, state_dir;
    bool json = false, memo = false, space = false;

    auto plan = app.add_subcommand("plan", "Optimize a session and print the plan");
    add_common(plan, common);
    plan->add_flag("--json", json, "Print the plan as JSON");
    plan->add_option("-o,--output", output, "Write to a file instead of stdout");

    auto run = app.add_subcommand("run", "Plan (or load a plan), execute it and validate every output");
    add_common(run, common);
    run->add_option("--plan", plan_file, "Plan JSON from `plan --json`")->check(CLI::ExistingFile);
    run->add_option("--state-dir", state_dir, "Directory for saved states");
    run->add_flag("--json", json, "Print the run report as JSON");
    run->add_option("-o,--output", output, "Write to a file instead of stdout");

    auto compare = app.add_subcommand("compare", "Compare the single methods with all rules together");
    add_common(compare, common);
    compare->add_flag("--json", json, "Print the rows as JSON");

    auto explain = app.add_subcommand("explain", "Print the memo or the plan in detail");
    add_common(explain, common);
    explain->add_flag("--memo", memo, "Print the memo");
    explain->add_flag("--space", space, "Print the physical plan space");

    CLI11_PARSE(app, argc, argv);

    try {
        PlanOptions options;
        auto s = open(common, options);
        if (*plan) {
            auto r = plan_session(s, options);
            write(output, json ? to_json(r.plan, &s.cost).dump(2) + "\n" : summary(s, r) + r.plan.to_string());
            if (r.exhaustive_agrees == false) return 4;
        } else if (*run) {
            TimedPlan p;
            if (plan_file.empty()) p = plan_session(s, options).plan;
            else p = plan_from_json(read_json_file(plan_file));
            StateStore store = state_dir.empty() ? StateStore() : StateStore(state_dir);
            auto report = run_session(s, p, store);
            if (json) {
                write(output, to_json(report, &s.cost).dump(2) + "\n");
            } else {
                std::ostringstream o;
                for (auto &t : report.times) {
                    o << s.arrivals.timeline.label(t.time) << ": cost " << t.cost << ", " << t.exchanged
                      << " exchanged, " << t.computed << " computed";
                    if (t.oracle_match) o << ", output matches the batch result";
                    o << "\n";
                    if (t.output) o << t.output->to_string() << "\n";
                }
                o << "total " << vec(report.cost) << " = " << reduce_cost(report.cost, s.cost) << "\n";
                write(output, o.str());
            }
        } else if (*compare) {
            auto rows = compare_methods(s, options);
            if (json) {
                Json a = Json::array();
                for (auto &r : rows)
                    a.push_back({ { "method", r.method }, { "cost", r.cost }, { "cost_vector", r.plan.cost },
                                  { "tuples", r.tuples } });
                std::cout << a.dump(2) << "\n";
            } else {
                std::cout << std::left << std::setw(8) << "method" << std::right << std::setw(10) << "cost"
                          << "  tuples\n";
                for (auto &r : rows) {
                    std::ostringstream t;
                    for (std::size_t i = 0; i != r.tuples.size(); ++i) t << (i ? ", " : "") << r.tuples[i];
                    std::cout << std::left << std::setw(8) << r.method << std::right << std::setw(10)
                              << std::setprecision(6) << r.cost << "  (" << t.str() << ")\n";
                }
            }
        } else if (*explain) {
            auto r = plan_session(s, options);
            if (memo) {
                std::cout << r.exploration.memo.dump();
            } else if (space) {
                for (std::size_t c = 0; c != r.space.classes.size(); ++c) {
                    auto &cls = r.space.classes[c];
                    std::cout << "C" << c << " group " << cls.group << " rows " << cls.cardinality << " save "
                              << cls.save_cost << " load " << cls.load_cost << "\n";
                    for (auto &a : cls.alts) {
                        std::cout << "  " << to_string(a.kind);
                        for (auto ch : a.children) std::cout << " C" << ch;
                        std::cout << " cost " << vec(a.cost) << (a.by_product ? " by-product" : "") << "\n";
                    }
                }
            } else {
                std::cout << summary(s, r) << r.plan.to_string();
            }
        }
    } catch (const ValidationError &e) {
        std::cerr << "validation failed: " << e.what() << "\n" << e.diff() << "\n";
        return 3;
    } catch (const ParseError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
