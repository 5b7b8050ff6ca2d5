#pragma once

#include "bnpmix/config.hpp"
#include "bnpmix/core.hpp"
#include "bnpmix/diagnostics.hpp"
#include "bnpmix/io.hpp"
#include "bnpmix/rng.hpp"
#include "bnpmix/sampler.hpp"
#include "bnpmix/summarize.hpp"
#include "bnpmix/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace bnpmix::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumeric = 2 };

/// PAM candidates are skipped above this N unless methods are listed explicitly.
inline constexpr std::size_t kPamMaxN = 1000;

inline std::string fmt(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
}

inline std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::size_t n = 500;
    std::uint64_t seed = 1;
    std::string spec = "paper";  ///< "paper" selects the built-in benchmark, otherwise a JSON file
    std::string out_dir;
};

inline MixtureSpec resolve_spec(const std::string& spec) {
    return spec == "paper" ? benchmark_spec() : load_mixture_spec(spec);
}

/// Writes data.csv and truth.csv into out_dir.
inline int cmd_generate(const GenerateOptions& opt, std::ostream& log) {
    if (opt.n < 1) throw ValidationError("--n must be at least 1");
    if (opt.out_dir.empty()) throw ValidationError("--out is required");
    const MixtureSpec spec = resolve_spec(opt.spec);
    RngStream rng(opt.seed, kDataStreamId);
    const Synthetic syn = generate(spec, opt.n, rng);
    ensure_dir(opt.out_dir);
    const std::string header = "bnpmix generate\n[generate]\nspec = " + opt.spec + "\nn = " + std::to_string(opt.n) +
                               "\nseed = " + std::to_string(opt.seed) + "\n";
    write_dataset_csv(join_path(opt.out_dir, "data.csv"), syn.data, header);
    write_labels(join_path(opt.out_dir, "truth.csv"), syn.truth, header);
    log << "wrote " << opt.n << " observations in " << syn.data.dim() << " dimensions, " << syn.truth.t()
        << " true clusters, to " << opt.out_dir << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOptions {
    std::string data;
    std::string out;  ///< trace file
    Config cfg;
};

/// Data as the sampler sees it: mvn-diag requires standardized columns.
struct PreparedData {
    Dataset data;
    bool auto_standardized = false;
};

inline PreparedData prepare_data(const Dataset& raw, ModelKind kind) {
    if (kind == ModelKind::diag && !raw.standardized()) return {standardize(raw), true};
    return {raw, false};
}

/// Geweke z per chain and R-hat across chains, one row per functional.
inline void print_diagnostics(std::ostream& out, std::span<const SampleTrace> traces) {
    std::vector<TraceFunctionals> f;
    for (const auto& tr : traces) f.push_back(functionals(tr));
    auto row = [&](const char* name, auto pick) {
        std::vector<std::vector<double>> chains;
        for (const auto& fc : f) chains.push_back(pick(fc));
        if (chains.empty() || chains.front().empty()) return;
        out << std::left << std::setw(10) << name << " geweke_z:";
        for (const auto& c : chains) {
            try {
                out << ' ' << fmt(geweke_z(c), 3);
            } catch (const std::exception&) {
                out << " NA";
            }
        }
        out << "  rhat: ";
        try {
            out << fmt(gelman_rubin(chains), 4);
        } catch (const std::exception&) {
            out << "NA";
        }
        out << '\n';
    };
    row("t", [](const TraceFunctionals& fc) { return fc.t; });
    row("logpost", [](const TraceFunctionals& fc) { return fc.log_post; });
    row("alpha", [](const TraceFunctionals& fc) { return fc.alpha; });
}

inline std::string fit_header(const std::string& data_path, bool auto_standardized, const Config& cfg) {
    std::string h = "bnpmix fit\n[data]\npath = " + data_path + "\n";
    if (auto_standardized) h += "standardized = auto\n";
    return h + cfg.to_ini();
}

struct FitOutcome {
    RunResult result;
    KDistribution k;
    int exit_code = kOk;
};

inline FitOutcome fit_dataset(const Dataset& data, const Config& cfg, std::ostream& log) {
    cfg.validate();
    FitOutcome o;
    o.result = run(data, cfg.model, cfg.prior_spec(), cfg.mcmc);
    for (std::size_t c = 0; c < o.result.chains.size(); ++c) {
        if (!o.result.chains[c].ok) log << "chain " << c + 1 << " aborted: " << o.result.chains[c].error << '\n';
    }
    const auto traces = o.result.traces();
    if (traces.empty()) {
        o.exit_code = kNumeric;
        return o;
    }
    o.k = posterior_k(traces, cfg.prior_spec(), data.n());
    return o;
}

inline int cmd_fit(const FitOptions& opt, std::ostream& log) {
    if (opt.out.empty()) throw ValidationError("--out is required");
    opt.cfg.validate();
    const PreparedData prep = prepare_data(read_dataset_csv(opt.data), opt.cfg.model);
    if (prep.auto_standardized) log << "mvn-diag: data standardized column-wise before fitting\n";
    FitOutcome o = fit_dataset(prep.data, opt.cfg, log);
    const auto traces = o.result.traces();
    write_trace(opt.out, traces, fit_header(opt.data, prep.auto_standardized, opt.cfg));
    if (o.exit_code != kOk) {
        log << "all chains aborted\n";
        return o.exit_code;
    }
    const MoveStats s = o.result.total_stats();
    std::size_t retained = 0;
    for (const auto& tr : traces) retained += tr.size();
    log << "retained samples: " << retained << '\n';
    log << "split acceptance: " << fmt(s.split_rate()) << " (" << s.split_accepted << "/" << s.split_proposed
        << ")\nmerge acceptance: " << fmt(s.merge_rate()) << " (" << s.merge_accepted << "/" << s.merge_proposed
        << ")\n";
    if (s.nonfinite_rejects > 0) log << "non-finite proposals rejected: " << s.nonfinite_rejects << '\n';
    print_diagnostics(log, traces);
    log << "posterior mode of " << (opt.cfg.prior_spec().is_mfm() ? "K" : "T") << ": " << o.k.mode() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

struct SummarizeOptions {
    std::string trace;
    std::string out_dir;
    std::optional<std::string> truth;
    Config cfg;
};

inline std::vector<MethodId> resolve_methods(const std::vector<std::string>& names, std::size_t n) {
    if (names.empty()) return full_method_grid(n <= kPamMaxN);
    std::vector<MethodId> out;
    for (const auto& m : names) out.push_back(parse_method(m));
    return out;
}

struct SummaryRow {
    SummaryResult result;
    std::optional<double> ari;
};

inline std::vector<SummaryRow> summary_rows(Summarizer& sm, const Config& cfg, const std::optional<Partition>& truth) {
    if (truth && truth->n() != sm.psm().n()) throw ValidationError("truth labels do not match the number of observations");
    std::vector<SummaryRow> rows;
    for (const auto& m : resolve_methods(cfg.methods, sm.psm().n())) {
        SummaryRow r{sm.run(m), std::nullopt};
        if (truth) r.ari = adjusted_rand_index(*truth, r.result.partition);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "method\tnum_clusters\tvalue\tari\n";
    for (const auto& r : rows) {
        out << r.result.method << '\t' << r.result.num_clusters << '\t' << detail::fmt_double(r.result.value) << '\t'
            << (r.ari ? detail::fmt_double(*r.ari) : "NA") << '\n';
    }
}

/// Writes psm.bin, summaries.txt and summary.tsv into out_dir.
inline int cmd_summarize(const SummarizeOptions& opt, std::ostream& log) {
    if (opt.out_dir.empty()) throw ValidationError("--out is required");
    opt.cfg.validate();
    std::optional<Partition> truth;
    if (opt.truth) {
        if (!std::filesystem::exists(*opt.truth)) throw IoError("truth file '" + *opt.truth + "' does not exist");
        truth = read_labels(*opt.truth);
    }
    auto traces = read_trace(opt.trace);
    if (traces.empty()) throw ValidationError("trace file holds no samples");
    ensure_dir(opt.out_dir);

    Summarizer sm(std::move(traces), opt.cfg.summary_options());
    const auto rows = summary_rows(sm, opt.cfg, truth);
    write_psm(join_path(opt.out_dir, "psm.bin"), sm.psm());
    if (opt.cfg.methods.empty() && sm.psm().n() > kPamMaxN) log << "pam strategies skipped for N > " << kPamMaxN << '\n';

    const std::string header = "bnpmix summarize\n[input]\ntrace = " + opt.trace +
                               (opt.truth ? "\ntruth = " + *opt.truth : std::string()) + "\n" + opt.cfg.to_ini();
    {
        auto out = detail::open_out(join_path(opt.out_dir, "summaries.txt"));
        out << comment_block(header) << '\n';
        for (const auto& r : rows) write_summary(out, r.result);
    }
    {
        auto out = detail::open_out(join_path(opt.out_dir, "summary.tsv"));
        out << comment_block(header);
        write_summary_table(out, rows);
    }
    write_summary_table(log, rows);
    return kOk;
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

struct ReplicateModel {
    std::string name;
    ModelKind kind;
    PriorKind prior;
};

struct Scenario {
    std::string name;
    std::size_t default_n;
    std::vector<ReplicateModel> models;
};

inline Scenario parse_scenario(const std::string& s) {
    if (s == "moderate") {
        return {s, 500,
                {{"MFM", ModelKind::full, PriorKind::mfm},
                 {"MFMH", ModelKind::hier, PriorKind::mfm},
                 {"DPM", ModelKind::full, PriorKind::dpm_hyper},
                 {"DPMH", ModelKind::hier, PriorKind::dpm_hyper}}};
    }
    if (s == "dpm-large") return {s, 2000, {{"DPMH", ModelKind::hier, PriorKind::dpm_hyper}}};
    if (s == "misspec") {
        return {s, 2000,
                {{"MFM-diag", ModelKind::diag, PriorKind::mfm}, {"DPM-diag", ModelKind::diag, PriorKind::dpm_hyper}}};
    }
    throw ValidationError("unknown scenario '" + s + "' (expected moderate, dpm-large or misspec)");
}

struct ReplicateOptions {
    std::string scenario;
    int replicates = 5;
    std::optional<std::size_t> n;
    std::uint64_t seed = 1;
    std::string out;  ///< CSV path
    Config cfg;       ///< prior hyperparameters, mcmc and summarize settings
};

/// Replicate r uses seed + r - 1 for both the data and the chains.
inline int cmd_replicate(const ReplicateOptions& opt, std::ostream& log) {
    const Scenario sc = parse_scenario(opt.scenario);
    if (opt.replicates < 1) throw ValidationError("--r must be at least 1");
    if (opt.out.empty()) throw ValidationError("--out is required");
    const std::size_t n = opt.n.value_or(sc.default_n);
    if (n < 1) throw ValidationError("--n must be at least 1");
    opt.cfg.validate();

    std::ostringstream header;
    header << "bnpmix replicate\n[replicate]\nscenario = " << sc.name << "\nreplicates = " << opt.replicates
           << "\nn = " << n << "\nseed = " << opt.seed << "\nmodels =";
    for (const auto& m : sc.models) header << ' ' << m.name;
    header << "\nreference_scale = N 10000 with 50 replicates; desk runs use the n and replicates above\n"
           << opt.cfg.to_ini();

    auto out = detail::open_out(opt.out);
    out << comment_block(header.str()) << "replicate,model,method,num_clusters,posterior_mode_k,ari\n";
    bool any_numeric_failure = false;
    for (int r = 1; r <= opt.replicates; ++r) {
        const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(r - 1);
        RngStream rng(seed, kDataStreamId);
        const Synthetic syn = generate(benchmark_spec(), n, rng);
        for (const auto& m : sc.models) {
            Config cfg = opt.cfg;
            cfg.model = m.kind;
            cfg.prior = m.prior;
            cfg.mcmc.seed = seed;
            const PreparedData prep = prepare_data(syn.data, m.kind);
            std::ostringstream chain_log;
            FitOutcome fo = fit_dataset(prep.data, cfg, chain_log);
            if (!chain_log.str().empty()) log << "replicate " << r << " " << m.name << ": " << chain_log.str();
            if (fo.exit_code != kOk) {
                any_numeric_failure = true;
                log << "replicate " << r << " " << m.name << ": no usable chains, skipped\n";
                continue;
            }
            const long mode_k = fo.k.mode();
            Summarizer sm(fo.result.traces(), cfg.summary_options());
            for (const auto& row : summary_rows(sm, cfg, syn.truth)) {
                out << r << ',' << m.name << ',' << row.result.method << ',' << row.result.num_clusters << ','
                    << mode_k << ',' << detail::fmt_double(*row.ari) << '\n';
            }
            out.flush();
            log << "replicate " << r << " " << m.name << ": posterior mode " << mode_k << ", split/merge acceptance "
                << fmt(fo.result.total_stats().acceptance_rate(), 3) << '\n';
        }
    }
    return any_numeric_failure ? kNumeric : kOk;
}

}  // namespace bnpmix::cli
