#include "bnpmix/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

using bnpmix::Config;

/// Command-line overrides, applied after the config file.
struct Overrides {
    void add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
             const std::string& help) {
        slots_.push_back({section + "." + key, std::nullopt});
        auto& slot = slots_.back();
        app->add_option(flag, slot.second, help);
    }

    void apply(Config& cfg) const {
        for (const auto& [path, value] : slots_) {
            if (!value) continue;
            const auto dot = path.find('.');
            cfg.apply(path.substr(0, dot), path.substr(dot + 1), *value, "command line");
        }
    }

private:
    std::list<std::pair<std::string, std::optional<std::string>>> slots_;
};

void add_model_options(CLI::App* app, Overrides& ov) {
    ov.add(app, "--model", "model", "kind", "mvn-full, mvn-full-hier or mvn-diag");
    ov.add(app, "--prior", "prior", "kind", "dpm, dpm-hyper or mfm");
    ov.add(app, "--alpha", "prior", "alpha", "DP concentration (dpm)");
    ov.add(app, "--alpha-rate", "prior", "alpha_rate", "rate of the exponential prior on alpha (dpm-hyper)");
    ov.add(app, "--gamma", "prior", "gamma", "symmetric Dirichlet parameter (mfm)");
    ov.add(app, "--k-prior", "prior", "k_prior", "prior on K: geometric:P, point:K or poisson:L (mfm)");
}

void add_mcmc_options(CLI::App* app, Overrides& ov) {
    ov.add(app, "--iters", "mcmc", "iters", "iterations per chain");
    ov.add(app, "--burnin", "mcmc", "burnin", "discarded leading iterations");
    ov.add(app, "--thin", "mcmc", "thin", "keep every thin-th iteration after burn-in");
    ov.add(app, "--chains", "mcmc", "chains", "independent chains");
    ov.add(app, "--n-split", "mcmc", "n_split", "restricted scans in the split launch");
    ov.add(app, "--n-merge", "mcmc", "n_merge", "parameter sweeps in the merge launch");
    ov.add(app, "--alloc-scans", "mcmc", "alloc_scans_per_iter", "allocation scans between split-merge moves");
}

void add_summary_options(CLI::App* app, Overrides& ov) {
    ov.add(app, "--methods", "summarize", "methods", "comma-separated loss+strategy list, medvedovic, map");
    ov.add(app, "--k-max", "summarize", "k_max", "largest candidate cluster count");
    ov.add(app, "--epsilon", "summarize", "epsilon", "Medvedovic threshold");
}

Config load_config(const std::string& path, const Overrides& ov) {
    Config cfg;
    if (!path.empty()) cfg.merge_ini_file(path);
    ov.apply(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian mixture clustering with split-merge MCMC"};
    app.require_subcommand(1);
    std::string config_path;

    bnpmix::cli::GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "simulate a Gaussian mixture dataset");
    g->add_option("--n", gen.n, "number of observations")->capture_default_str();
    g->add_option("--seed", gen.seed, "random seed")->capture_default_str();
    g->add_option("--spec", gen.spec, "'paper' for the built-in benchmark or a JSON mixture spec")->capture_default_str();
    g->add_option("--out", gen.out_dir, "output directory")->required();

    bnpmix::cli::FitOptions fit;
    Overrides fit_ov;
    bool audit = false;
    auto* f = app.add_subcommand("fit", "run split-merge MCMC chains");
    f->add_option("--data", fit.data, "dataset CSV")->required()->check(CLI::ExistingFile);
    f->add_option("--out", fit.out, "trace file")->required();
    f->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    fit_ov.add(f, "--seed", "mcmc", "seed", "random seed");
    f->add_flag("--audit", audit, "recompute the log-posterior every sweep");
    add_model_options(f, fit_ov);
    add_mcmc_options(f, fit_ov);

    bnpmix::cli::SummarizeOptions sum;
    Overrides sum_ov;
    std::string truth;
    auto* s = app.add_subcommand("summarize", "posterior summaries of a trace file");
    s->add_option("--trace", sum.trace, "trace file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", sum.out_dir, "output directory")->required();
    s->add_option("--truth", truth, "true labels for ARI");
    s->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    add_summary_options(s, sum_ov);

    bnpmix::cli::ReplicateOptions rep;
    Overrides rep_ov;
    std::optional<std::size_t> rep_n;
    auto* r = app.add_subcommand("replicate", "generate, fit and summarize over replicate datasets");
    r->add_option("scenario", rep.scenario, "moderate, dpm-large or misspec")->required();
    r->add_option("--r", rep.replicates, "number of replicates")->capture_default_str();
    r->add_option("--n", rep_n, "observations per dataset");
    r->add_option("--seed", rep.seed, "seed of the first replicate")->capture_default_str();
    r->add_option("--out", rep.out, "output CSV")->required();
    r->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    rep_ov.add(r, "--gamma", "prior", "gamma", "symmetric Dirichlet parameter (mfm)");
    rep_ov.add(r, "--k-prior", "prior", "k_prior", "prior on K (mfm)");
    rep_ov.add(r, "--alpha-rate", "prior", "alpha_rate", "rate of the exponential prior on alpha");
    add_mcmc_options(r, rep_ov);
    add_summary_options(r, rep_ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return bnpmix::cli::kValidation;
    }

    try {
        if (*g) return bnpmix::cli::cmd_generate(gen, std::cout);
        if (*f) {
            fit.cfg = load_config(config_path, fit_ov);
            fit.cfg.mcmc.audit = audit;
            return bnpmix::cli::cmd_fit(fit, std::cout);
        }
        if (*s) {
            sum.cfg = load_config(config_path, sum_ov);
            if (!truth.empty()) sum.truth = truth;
            return bnpmix::cli::cmd_summarize(sum, std::cout);
        }
        if (*r) {
            rep.cfg = load_config(config_path, rep_ov);
            rep.n = rep_n;
            return bnpmix::cli::cmd_replicate(rep, std::cout);
        }
    } catch (const bnpmix::NumericDegeneracyError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return bnpmix::cli::kNumeric;
    } catch (const bnpmix::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bnpmix::cli::kValidation;
    } catch (const bnpmix::DegenerateDataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bnpmix::cli::kValidation;
    }
    return bnpmix::cli::kValidation;
}
