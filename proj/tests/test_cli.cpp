#include "bnpmix/commands.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace bnpmix;
using namespace bnpmix::cli;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("bnpmix_cli_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Runs the built binary with stdout and stderr discarded; returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(BNPMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Config quick_config() {
    Config cfg;
    cfg.mcmc.iters = 60;
    cfg.mcmc.burnin = 10;
    cfg.mcmc.thin = 5;
    cfg.mcmc.chains = 2;
    cfg.mcmc.seed = 3;
    return cfg;
}

std::string generate_small(const std::string& dir, std::size_t n, std::uint64_t seed) {
    GenerateOptions g;
    g.n = n;
    g.seed = seed;
    g.out_dir = dir;
    std::ostringstream log;
    EXPECT_EQ(cmd_generate(g, log), kOk);
    return join_path(dir, "data.csv");
}

}  // namespace

TEST(Config, DefaultsValidate) {
    Config cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.model, ModelKind::full);
    EXPECT_EQ(cfg.prior, PriorKind::mfm);
    EXPECT_TRUE(cfg.prior_spec().is_mfm());
}

TEST(Config, IniSectionsAreApplied) {
    std::istringstream in(
        "[model]\nkind = mvn-diag\n"
        "[prior]\nkind = dpm\nalpha = 2.5\n"
        "[mcmc]\niters = 300\nburnin = 20\nthin = 4\nchains = 3\nseed = 9\n"
        "[summarize]\nmethods = vilb+complete, medvedovic\nepsilon = 0.05\nk_max = 7\n");
    Config cfg;
    cfg.merge_ini(in);
    EXPECT_EQ(cfg.model, ModelKind::diag);
    EXPECT_EQ(cfg.prior, PriorKind::dpm);
    EXPECT_EQ(cfg.alpha, 2.5);
    EXPECT_EQ(cfg.mcmc.iters, 300);
    EXPECT_EQ(cfg.mcmc.chains, 3);
    EXPECT_EQ(cfg.mcmc.seed, 9u);
    EXPECT_EQ(cfg.methods, (std::vector<std::string>{"vilb+complete", "medvedovic"}));
    EXPECT_EQ(cfg.k_max, std::optional<std::size_t>(7));
    EXPECT_EQ(cfg.summary_options().medvedovic_epsilon, 0.05);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
    Config cfg;
    std::istringstream unknown_key("[mcmc]\nsweeps = 10\n");
    EXPECT_THROW(cfg.merge_ini(unknown_key), ValidationError);
    std::istringstream unknown_section("[output]\niters = 10\n");
    EXPECT_THROW(cfg.merge_ini(unknown_section), ValidationError);
    std::istringstream loose("iters = 10\n");
    EXPECT_THROW(cfg.merge_ini(loose), ValidationError);
    std::istringstream not_number("[prior]\nalpha = many\n");
    EXPECT_THROW(cfg.merge_ini(not_number), ValidationError);
    std::istringstream bad_model("[model]\nkind = mvn-t\n");
    EXPECT_THROW(cfg.merge_ini(bad_model), ValidationError);
    std::istringstream bad_k_prior("[prior]\nk_prior = zipf:2\n");
    EXPECT_THROW(cfg.merge_ini(bad_k_prior), ValidationError);

    Config bad = quick_config();
    bad.epsilon = 1.0;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = quick_config();
    bad.methods = {"vi+complete"};
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Config, ToIniRoundTrips) {
    Config cfg = quick_config();
    cfg.model = ModelKind::hier;
    cfg.gamma = 0.1 + 0.2;
    cfg.k_prior = "poisson:3";
    cfg.methods = {"pear+average", "map"};
    cfg.epsilon = 0.03;
    cfg.k_max = 12;
    EXPECT_NE(Config{}.to_ini().find("k_max = auto"), std::string::npos);
    std::istringstream reset("[summarize]\nk_max = auto\n");
    Config cleared = cfg;
    cleared.merge_ini(reset);
    EXPECT_FALSE(cleared.k_max.has_value());
    std::istringstream defaults(Config{}.to_ini());
    Config echoed = cfg;
    echoed.merge_ini(defaults);
    EXPECT_TRUE(echoed.methods.empty());
    EXPECT_EQ(echoed.to_ini(), Config{}.to_ini());
    const std::string text = cfg.to_ini();
    std::istringstream in(text);
    Config back;
    back.merge_ini(in);
    EXPECT_EQ(back.to_ini(), text);
    EXPECT_EQ(back.gamma, cfg.gamma);
    EXPECT_EQ(back.model, ModelKind::hier);
}

TEST(Generate, SameSeedGivesIdenticalFiles) {
    const std::string a = temp_dir("gen_a"), b = temp_dir("gen_b"), c = temp_dir("gen_c");
    generate_small(a, 120, 5);
    generate_small(b, 120, 5);
    generate_small(c, 120, 6);
    EXPECT_EQ(slurp(join_path(a, "data.csv")), slurp(join_path(b, "data.csv")));
    EXPECT_EQ(slurp(join_path(a, "truth.csv")), slurp(join_path(b, "truth.csv")));
    EXPECT_NE(slurp(join_path(a, "data.csv")), slurp(join_path(c, "data.csv")));
    const Dataset d = read_dataset_csv(join_path(a, "data.csv"));
    EXPECT_EQ(d.n(), 120u);
    EXPECT_EQ(d.dim(), 2u);
    EXPECT_EQ(read_labels(join_path(a, "truth.csv")).n(), 120u);
}

TEST(Generate, RejectsZeroObservations) {
    GenerateOptions g;
    g.n = 0;
    g.out_dir = temp_dir("gen_zero");
    std::ostringstream log;
    EXPECT_THROW(cmd_generate(g, log), ValidationError);
    EXPECT_EQ(run_cli("generate --n 0 --out " + g.out_dir), kValidation);
}

TEST(Fit, WritesTraceWithConfigEcho) {
    const std::string dir = temp_dir("fit");
    const std::string data = generate_small(dir, 60, 2);
    FitOptions f;
    f.data = data;
    f.out = join_path(dir, "trace.tsv");
    f.cfg = quick_config();
    std::ostringstream log;
    ASSERT_EQ(cmd_fit(f, log), kOk);
    const auto traces = read_trace(f.out);
    ASSERT_EQ(traces.size(), 2u);
    EXPECT_EQ(traces[0].size(), 10u);
    EXPECT_EQ(traces[0].records().front().iter, 15);
    const std::string text = slurp(f.out);
    EXPECT_NE(text.find("iters = 60"), std::string::npos);
    EXPECT_EQ(text.find("standardized = auto"), std::string::npos);
    EXPECT_NE(log.str().find("posterior mode of K"), std::string::npos);
}

TEST(Fit, DiagOnRawDataStandardizesAndRecordsIt) {
    const std::string dir = temp_dir("fit_diag");
    FitOptions f;
    f.data = generate_small(dir, 60, 4);
    f.out = join_path(dir, "trace.tsv");
    f.cfg = quick_config();
    f.cfg.model = ModelKind::diag;
    std::ostringstream log;
    ASSERT_EQ(cmd_fit(f, log), kOk);
    EXPECT_NE(slurp(f.out).find("standardized = auto"), std::string::npos);
    EXPECT_NE(log.str().find("standardized"), std::string::npos);
}

TEST(Fit, UsageErrorsExitWithOne) {
    const std::string dir = temp_dir("fit_bad");
    const std::string data = generate_small(dir, 30, 1);
    const std::string out = join_path(dir, "trace.tsv");
    EXPECT_EQ(run_cli("fit --data " + data + " --out " + out + " --model mvn-t"), kValidation);
    EXPECT_EQ(run_cli("fit --data " + data + " --out " + out + " --thin 0"), kValidation);
    EXPECT_EQ(run_cli("fit --data " + join_path(dir, "missing.csv") + " --out " + out), kValidation);
    EXPECT_EQ(run_cli("bogus"), kValidation);
    EXPECT_EQ(run_cli("fit --data " + data + " --out " + out + " --iters 30 --burnin 5 --thin 5 --chains 1"), kOk);
}

TEST(Summarize, ConstantTraceReturnsThatPartition) {
    const std::string dir = temp_dir("sum_const");
    // 24 points so the default k_max of N / 8 reaches three clusters
    std::vector<int> raw(24), renamed(24);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = 1 + static_cast<int>((i * 7) % 3);
        renamed[i] = 10 - 3 * raw[i];
    }
    const Partition z = relabel_contiguous(raw);
    const std::vector<SampleTrace> traces{test::trace_of({z, z, z}), test::trace_of({z, z}, 2)};
    const std::string trace = join_path(dir, "trace.tsv");
    write_trace(trace, traces);
    write_labels(join_path(dir, "truth.csv"), relabel_contiguous(renamed));

    SummarizeOptions s;
    s.trace = trace;
    s.out_dir = join_path(dir, "out");
    s.truth = join_path(dir, "truth.csv");
    s.cfg.methods = {"vilb+complete"};
    std::ostringstream log;
    ASSERT_EQ(cmd_summarize(s, log), kOk);

    Summarizer sm(read_trace(trace), s.cfg.summary_options());
    const auto rows = summary_rows(sm, s.cfg, read_labels(*s.truth));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].result.method, "vilb+complete");
    EXPECT_TRUE(same_set_partition(rows[0].result.partition.labels(), z.labels()));
    EXPECT_EQ(rows[0].ari, 1.0);

    const Psm psm = read_psm(join_path(s.out_dir, "psm.bin"));
    EXPECT_EQ(psm.n(), 24u);
    const std::string table = slurp(join_path(s.out_dir, "summary.tsv"));
    EXPECT_NE(table.find("vilb+complete\t3\t"), std::string::npos);
    EXPECT_NE(table.find("trace = " + trace), std::string::npos);
}

TEST(Summarize, MissingTruthAndMismatchedTruthAreErrors) {
    const std::string dir = temp_dir("sum_truth");
    const Partition z = test::labels({1, 2, 1});
    const std::string trace = join_path(dir, "trace.tsv");
    write_trace(trace, std::vector<SampleTrace>{test::trace_of({z})});
    SummarizeOptions s;
    s.trace = trace;
    s.out_dir = join_path(dir, "out");
    s.truth = join_path(dir, "absent.csv");
    std::ostringstream log;
    EXPECT_THROW(cmd_summarize(s, log), ValidationError);
    EXPECT_EQ(run_cli("summarize --trace " + trace + " --out " + s.out_dir + " --truth " + *s.truth), kValidation);

    write_labels(join_path(dir, "short.csv"), test::labels({1, 2}));
    s.truth = join_path(dir, "short.csv");
    EXPECT_THROW(cmd_summarize(s, log), ValidationError);
}

TEST(Summarize, DefaultGridNamesEveryMethod) {
    std::vector<std::string> names;
    for (const auto& m : resolve_methods({}, 50)) names.push_back(m.name());
    const std::vector<std::string> expected{
        "binder+average", "binder+complete", "binder+pam", "binder+samples", "pear+average", "pear+complete",
        "pear+pam",       "pear+samples",    "vilb+average", "vilb+complete", "vilb+pam",    "vilb+samples",
        "medvedovic",     "map"};
    EXPECT_EQ(names, expected);
    for (const auto& m : resolve_methods({}, kPamMaxN + 1)) EXPECT_NE(m.strategy == Strategy::pam &&
                                                                           m.kind == MethodId::Kind::optimised,
                                                                       true);
    EXPECT_EQ(resolve_methods({"binder+pam"}, kPamMaxN + 1).size(), 1u);
}

TEST(Summarize, EveryDefaultMethodRunsOnASmallTrace) {
    RngStream rng(8, 0);
    std::vector<Partition> parts;
    for (int i = 0; i < 40; ++i) parts.push_back(test::random_partition(9, 3, rng));
    Config cfg;
    Summarizer sm(std::vector<SampleTrace>{test::trace_of(parts)}, cfg.summary_options());
    const auto rows = summary_rows(sm, cfg, parts.front());
    EXPECT_EQ(rows.size(), 14u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.result.partition.n(), 9u);
        ASSERT_TRUE(r.ari.has_value());
        EXPECT_LE(*r.ari, 1.0 + 1e-12);
    }
}

TEST(Replicate, ScenarioModelLists) {
    auto names = [](const Scenario& s) {
        std::vector<std::string> out;
        for (const auto& m : s.models) out.push_back(m.name);
        return out;
    };
    const Scenario mod = parse_scenario("moderate");
    EXPECT_EQ(mod.default_n, 500u);
    EXPECT_EQ(names(mod), (std::vector<std::string>{"MFM", "MFMH", "DPM", "DPMH"}));
    const Scenario large = parse_scenario("dpm-large");
    EXPECT_EQ(large.default_n, 2000u);
    EXPECT_EQ(names(large), (std::vector<std::string>{"DPMH"}));
    EXPECT_EQ(large.models[0].kind, ModelKind::hier);
    const Scenario mis = parse_scenario("misspec");
    EXPECT_EQ(names(mis), (std::vector<std::string>{"MFM-diag", "DPM-diag"}));
    for (const auto& m : mis.models) EXPECT_EQ(m.kind, ModelKind::diag);
    EXPECT_THROW(parse_scenario("gene"), ValidationError);
}

TEST(Replicate, WritesTidyCsv) {
    const std::string dir = temp_dir("rep");
    ReplicateOptions r;
    r.scenario = "dpm-large";
    r.replicates = 2;
    r.n = 40;
    r.out = join_path(dir, "rep.csv");
    r.cfg = quick_config();
    r.cfg.methods = {"vilb+complete", "medvedovic"};
    std::ostringstream log;
    ASSERT_EQ(cmd_replicate(r, log), kOk);
    std::ifstream in(r.out);
    std::string line;
    int rows = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            EXPECT_EQ(line, "replicate,model,method,num_clusters,posterior_mode_k,ari");
            header = true;
            continue;
        }
        EXPECT_EQ(line.rfind(std::to_string(rows / 2 + 1) + ",DPMH,", 0), 0u) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 4);
    EXPECT_NE(slurp(r.out).find("reference_scale = N 10000 with 50 replicates"), std::string::npos);
    EXPECT_EQ(run_cli("replicate gene --out " + join_path(dir, "x.csv")), kValidation);
}
