#include "pdmp/cli.hpp"

#include "pdmp/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <system_error>

namespace pdmp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string command;
    std::string model;
    std::string policy;
    std::string out = ".";
    double tol = 1e-8;
    double tol_rho = 1e-8;
    std::size_t max_iter = 200;
    double horizon = 1e4;
    std::size_t reps = 32;
    std::optional<std::uint64_t> seed;
    std::optional<double> rho;
    std::optional<double> x0;
    std::size_t resolution = DiscretizationOptions{}.resolution;
    std::size_t threads = 0;
    bool strict_audit = false;
    bool deterministic = false;
    bool trajectory = false;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Command {
public:
    Command(const RunConfig& cfg, std::ostream& out, std::ostream& err) : cfg_(cfg), out_(out), err_(err) {}

    int run() {
        if (cfg_.command == "validate") return validate();
        load();
        if (cfg_.command == "audit") return audit();
        if (cfg_.command == "evaluate") return evaluate();
        if (cfg_.command == "solve") return solve(false);
        if (cfg_.command == "report") return solve(true);
        return simulate();
    }

private:
    void load() {
        model_ = load_model(cfg_.model);
        info_ = {sha256_file(cfg_.model), model_.name};
        mesh_.resolution = cfg_.resolution;
    }

    fs::path out_path(const std::string& name) const { return fs::path(cfg_.out) / name; }

    json stamped(const std::string& kind, json body) const {
        json doc = envelope(info_, kind);
        doc.update(body);
        return doc;
    }

    FeedbackPolicy initial_policy() const {
        return cfg_.policy.empty() ? lowest_index_policy(model_) : read_policy(cfg_.policy);
    }

    int validate() {
        const PdmpModel m = read_model(cfg_.model);
        const auto violations = validate_model(m);
        for (const auto& v : violations) err_ << "violation: " << v.describe() << '\n';
        if (!violations.empty()) return kExitValidation;
        out_ << "valid: " << m.interior_size() << " interior points, " << m.grid.boundary_size()
             << " boundary points, " << m.action_count() << " actions\n";
        return kExitOk;
    }

    AuditReport run_audit(const std::optional<FeedbackPolicy>& policy) {
        AuditOptions opts;
        opts.mesh = mesh_;
        AuditReport report = audit_assumptions(model_, policy, opts);
        for (const auto& i : report.items) {
            std::ostream& os = i.status == AuditStatus::fail ? err_ : out_;
            os << "audit " << i.id << ": " << to_string(i.status);
            if (std::isfinite(i.worst_slack)) os << " (worst slack " << i.worst_slack << " at " << i.location << ")";
            os << '\n';
        }
        return report;
    }

    int audit() {
        std::optional<FeedbackPolicy> policy;
        if (!cfg_.policy.empty()) policy = read_policy(cfg_.policy);
        const AuditReport report = run_audit(policy);
        write_json(out_path("audit.json"), stamped("audit", {{"audit", to_json(report)}}));
        return cfg_.strict_audit && !report.passed() ? kExitStrictAudit : kExitOk;
    }

    EvaluationOptions eval_options() const {
        EvaluationOptions e;
        e.tol = cfg_.tol;
        return e;
    }

    int evaluate() {
        const FeedbackPolicy policy = initial_policy();
        const FlowDiscretization disc(model_, mesh_);
        const EvaluationResult r = evaluate_policy(disc, policy, eval_options());
        write_json(out_path("evaluation.json"),
                   stamped("evaluation", {{"evaluation", to_json(r)}, {"policy", to_json(policy)}}));
        out_ << "rho = " << format_double(r.rho) << "  residual = " << r.residual << '\n';
        return kExitOk;
    }

    int solve(bool report) {
        const AuditReport audit_report = run_audit(std::nullopt);
        if (!audit_report.passed()) {
            if (cfg_.strict_audit) {
                err_ << "strict audit failed; not solving\n";
                return kExitStrictAudit;
            }
            err_ << "warning: audit reported failures; continuing\n";
        }
        PiaOptions opts;
        opts.tol_rho = cfg_.tol_rho;
        opts.max_iter = cfg_.max_iter;
        opts.evaluation = eval_options();
        opts.mesh = mesh_;
        const FlowDiscretization disc(model_, mesh_);
        const PiaResult result = run_pia(disc, initial_policy(), opts);

        write_json(out_path("evaluation.json"),
                   stamped("evaluation", {{"evaluation", to_json(result.evaluation)},
                                          {"status", to_string(result.trace.status)}}));
        write_json(out_path("policy.json"), stamped("policy", {{"policy", to_json(result.policy)},
                                                               {"rho", result.evaluation.rho}}));
        write_text(out_path("trace.csv"), trace_csv(info_, result.trace));
        write_json(out_path("trace.json"), stamped("trace", {{"trace", to_json(result.trace)}}));
        write_json(out_path("audit.json"), stamped("audit", {{"audit", to_json(audit_report)}}));
        if (report) write_report(result.trace);

        out_ << "status = " << to_string(result.trace.status) << "  iterations = " << result.trace.records.size()
             << "  rho = " << format_double(result.evaluation.rho) << '\n';
        return result.trace.status == PiaStatus::converged ? kExitOk : kExitNoConvergence;
    }

    void write_report(const PiaTrace& trace) {
        std::ostringstream rho, res;
        rho << csv_header(info_) << "n,rho\n";
        res << csv_header(info_) << "n,poisson_residual,optimality_residual\n";
        for (const auto& r : trace.records) {
            rho << r.n << ',' << format_double(r.rho) << '\n';
            res << r.n << ',' << format_double(r.poisson_residual) << ',' << format_double(r.optimality_residual)
                << '\n';
        }
        write_text(out_path("report_rho.csv"), rho.str());
        write_text(out_path("report_residuals.csv"), res.str());
        out_ << "n        rho                      poisson_residual  optimality_residual\n";
        for (const auto& r : trace.records)
            out_ << r.n << "  " << format_double(r.rho) << "  " << r.poisson_residual << "  "
                 << r.optimality_residual << '\n';
    }

    int simulate() {
        if (!cfg_.seed) throw UsageError("simulate needs --seed");
        if (!(cfg_.horizon > 0.0)) throw UsageError("--horizon must be positive");
        if (cfg_.reps == 0) throw UsageError("--reps must be positive");
        fs::path policy_file = cfg_.policy;
        if (policy_file.empty()) {
            policy_file = out_path("policy.json");
            if (!fs::exists(policy_file)) throw UsageError("simulate needs --policy (or a policy.json in --out)");
        }
        std::ifstream in(policy_file);
        if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + policy_file.string());
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ModelError(policy_file.string() + ": " + e.what());
        }
        const FeedbackPolicy policy = policy_from_json(doc);
        std::optional<double> rho = cfg_.rho;
        if (!rho && doc.contains("rho") && doc.at("rho").is_number()) rho = doc.at("rho").get<double>();

        const FlowDiscretization disc(model_, mesh_);
        SimulationOptions sopts;
        sopts.threads = cfg_.deterministic ? 1 : cfg_.threads;
        const Simulator sim(disc, policy, sopts);
        const double x0 = cfg_.x0 ? *cfg_.x0 : model_.grid.points.front();

        double allowance = 0.0;
        try {
            EvaluationOptions eo = eval_options();
            eo.skip_residual = true;
            allowance = transient_allowance(evaluate_policy(disc, policy, eo), cfg_.horizon);
        } catch (const Error& e) {
            err_ << "warning: policy evaluation failed (" << e.what() << "); no start-up bias allowance\n";
        }
        const ValidationVerdict v = mc_validate(sim, rho.value_or(0.0), x0, cfg_.horizon, cfg_.reps, *cfg_.seed,
                                                allowance);
        json body = {{"horizon", cfg_.horizon}, {"replications", cfg_.reps}, {"seed", *cfg_.seed}, {"x0", x0},
                     {"mean", v.mean}, {"std_error", v.std_error}, {"replication_means", v.replication_means},
                     {"jumps", v.jumps}, {"boundary_hits", v.boundary_hits}};
        if (rho) {
            body["validation"] = to_json(v);
        }
        if (cfg_.trajectory) {
            SimulationOptions topts = sopts;
            topts.record_events = true;
            const Simulator tsim(disc, policy, topts);
            const auto [record, summary] = tsim.simulate(x0, cfg_.horizon, *cfg_.seed, 0);
            body["replication0"] = to_json(summary);
            write_text(out_path("trajectory.csv"), trajectory_csv(info_, record));
        }
        write_json(out_path("simulation.json"), stamped("simulation", body));
        out_ << "mean = " << format_double(v.mean) << "  se = " << v.std_error;
        if (rho) out_ << "  rho = " << format_double(*rho) << "  verdict = " << (v.pass ? "pass" : "fail");
        out_ << '\n';
        return kExitOk;
    }

    const RunConfig& cfg_;
    std::ostream& out_;
    std::ostream& err_;
    PdmpModel model_;
    ArtifactInfo info_;
    DiscretizationOptions mesh_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Average-cost policy iteration for piecewise deterministic Markov processes", kToolName};
    app.add_option("command", cfg.command, "validate | audit | evaluate | solve | simulate | report")
        ->required()
        ->check(CLI::IsMember({"validate", "audit", "evaluate", "solve", "simulate", "report"}));
    app.add_option("--model", cfg.model, "model JSON file")->required();
    app.add_option("--policy", cfg.policy, "policy JSON file");
    app.add_option("--out", cfg.out, "artifact directory");
    app.add_option("--tol", cfg.tol, "evaluation tolerance")->check(CLI::PositiveNumber);
    app.add_option("--tol-rho", cfg.tol_rho, "policy iteration tolerance on rho")->check(CLI::PositiveNumber);
    app.add_option("--max-iter", cfg.max_iter, "policy iteration cap")->check(CLI::PositiveNumber);
    app.add_option("--horizon", cfg.horizon, "simulation horizon");
    app.add_option("--reps", cfg.reps, "simulation replications");
    app.add_option("--seed", cfg.seed, "simulation seed");
    app.add_option("--rho", cfg.rho, "reference average cost for simulate");
    app.add_option("--x0", cfg.x0, "initial state for simulate");
    app.add_option("--resolution", cfg.resolution, "sub-intervals per flow cell")->check(CLI::PositiveNumber);
    app.add_option("--threads", cfg.threads, "worker cap (0: hardware concurrency)");
    app.add_flag("--strict-audit", cfg.strict_audit, "fail when the assumption audit fails");
    app.add_flag("--deterministic", cfg.deterministic, "single worker, fixed reduction order");
    app.add_flag("--trajectory", cfg.trajectory, "write the first replication's trajectory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        Command command(cfg, out, err);
        return command.run();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::system_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        for (const auto& v : e.violations()) err << "violation: " << v.describe() << '\n';
        return kExitValidation;
    } catch (const ModelError& e) {
        err << "model error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const SimulationAbort& e) {
        err << "simulation aborted: " << e.what() << '\n';
        return kExitSimulationAbort;
    } catch (const ConvergenceError& e) {
        err << "no convergence: " << e.what();
        if (e.subdominant_modulus() >= 0.0) err << " (estimated subdominant modulus " << e.subdominant_modulus() << ")";
        err << '\n';
        return kExitNoConvergence;
    } catch (const SingularSystemError& e) {
        err << "no convergence: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace pdmp
