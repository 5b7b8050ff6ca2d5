#pragma once

#include "bnpmix/components.hpp"
#include "bnpmix/core.hpp"
#include "bnpmix/priors.hpp"
#include "bnpmix/sampler.hpp"
#include "bnpmix/summarize.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace bnpmix {

inline PriorKind parse_prior_kind(std::string_view s) {
    if (s == "dpm") return PriorKind::dpm;
    if (s == "dpm-hyper") return PriorKind::dpm_hyper;
    if (s == "mfm") return PriorKind::mfm;
    throw ValidationError("unknown prior '" + std::string(s) + "' (expected dpm, dpm-hyper or mfm)");
}

/// "geometric:P", "point:K0" or "poisson:LAMBDA".
inline KPrior parse_k_prior(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ValidationError("K prior '" + s + "' must look like name:value");
    const std::string name = s.substr(0, colon);
    const std::string val = s.substr(colon + 1);
    try {
        std::size_t used = 0;
        if (name == "geometric") {
            const double p = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            return KPrior::geometric(p);
        }
        if (name == "point") {
            const int k0 = std::stoi(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            return KPrior::point_mass(k0);
        }
        if (name == "poisson") {
            const double l = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            return KPrior::poisson_shifted(l);
        }
    } catch (const std::logic_error&) {
        throw ValidationError("K prior '" + s + "' has an invalid value");
    }
    throw ValidationError("unknown K prior '" + name + "' (expected geometric, point or poisson)");
}

/// Resolved settings shared by fit, summarize and replicate.
struct Config {
    ModelKind model = ModelKind::full;

    PriorKind prior = PriorKind::mfm;
    double gamma = 1.0;
    std::string k_prior = "geometric:0.1";
    double alpha = 1.0;
    double alpha_rate = 1.0;

    SplitMergeConfig mcmc;

    std::vector<std::string> methods;  ///< empty: the full grid
    std::optional<std::size_t> k_max;
    double epsilon = 0.01;
    double l1 = 1.0;
    double l2 = 1.0;

    [[nodiscard]] PriorSpec prior_spec() const {
        switch (prior) {
            case PriorKind::dpm: return PriorSpec::dpm(alpha);
            case PriorKind::dpm_hyper: return PriorSpec::dpm_hyper(alpha_rate);
            case PriorKind::mfm: return PriorSpec::mfm(gamma, parse_k_prior(k_prior));
        }
        throw ValidationError("unknown prior");
    }

    [[nodiscard]] SummaryOptions summary_options() const {
        SummaryOptions o;
        o.binder = {l1, l2};
        o.k_max = k_max;
        o.medvedovic_epsilon = epsilon;
        return o;
    }

    void validate() const {
        prior_spec().validate();
        mcmc.validate();
        BinderConfig{l1, l2}.validate();
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
        if (k_max && *k_max < 1) throw ValidationError("k_max must be at least 1");
        for (const auto& m : methods) parse_method(m);
    }

    /// Reads INI sections [model], [prior], [mcmc], [summarize]; unknown keys are errors.
    void merge_ini(std::istream& in, const std::string& name = "config") {
        namespace pt = boost::property_tree;
        pt::ptree tree;
        try {
            pt::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ValidationError(name + ": " + e.what());
        }
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty()) {
                throw ValidationError(name + ": key '" + section + "' must sit inside a section");
            }
            for (const auto& [key, node] : body) apply(section, key, node.data(), name);
        }
    }

    void merge_ini_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot read config '" + path + "'");
        merge_ini(in, path);
    }

    void apply(const std::string& section, const std::string& key, const std::string& value,
               const std::string& name = "config") {
        const std::string where = name + ": [" + section + "] " + key;
        auto as_double = [&] {
            try {
                std::size_t used = 0;
                const double v = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::logic_error&) {
                throw ValidationError(where + " expects a number, got '" + value + "'");
            }
        };
        auto as_long = [&] {
            try {
                std::size_t used = 0;
                const long v = std::stol(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::logic_error&) {
                throw ValidationError(where + " expects an integer, got '" + value + "'");
            }
        };
        if (section == "model" && key == "kind") model = parse_model_kind(value);
        else if (section == "prior" && key == "kind") prior = parse_prior_kind(value);
        else if (section == "prior" && key == "gamma") gamma = as_double();
        else if (section == "prior" && key == "k_prior") k_prior = (parse_k_prior(value), value);
        else if (section == "prior" && key == "alpha") alpha = as_double();
        else if (section == "prior" && key == "alpha_rate") alpha_rate = as_double();
        else if (section == "mcmc" && key == "iters") mcmc.iters = as_long();
        else if (section == "mcmc" && key == "burnin") mcmc.burnin = as_long();
        else if (section == "mcmc" && key == "thin") mcmc.thin = as_long();
        else if (section == "mcmc" && key == "chains") mcmc.chains = static_cast<int>(as_long());
        else if (section == "mcmc" && key == "seed") mcmc.seed = static_cast<std::uint64_t>(as_long());
        else if (section == "mcmc" && key == "n_split") mcmc.n_split = static_cast<int>(as_long());
        else if (section == "mcmc" && key == "n_merge") mcmc.n_merge = static_cast<int>(as_long());
        else if (section == "mcmc" && key == "param_refresh_per_iter") mcmc.param_refresh_per_iter = static_cast<int>(as_long());
        else if (section == "mcmc" && key == "alloc_scans_per_iter") mcmc.alloc_scans_per_iter = static_cast<int>(as_long());
        else if (section == "summarize" && key == "methods") methods = value == "all" ? std::vector<std::string>{} : split_list(value);
        else if (section == "summarize" && key == "k_max") {
            if (value == "auto") k_max.reset();
            else k_max = static_cast<std::size_t>(as_long());
        }
        else if (section == "summarize" && key == "epsilon") epsilon = as_double();
        else if (section == "summarize" && key == "l1") l1 = as_double();
        else if (section == "summarize" && key == "l2") l2 = as_double();
        else throw ValidationError(name + ": unknown setting [" + section + "] " + key);
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s + ",") {
            if (c == ',' || c == ' ') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return out;
    }

    /// Canonical INI text of every resolved setting.
    [[nodiscard]] std::string to_ini() const {
        std::ostringstream o;
        auto num = [](double v) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        o << "[model]\nkind = " << to_string(model) << "\n";
        o << "[prior]\nkind = " << to_string(prior) << "\n";
        if (prior == PriorKind::mfm) o << "gamma = " << num(gamma) << "\nk_prior = " << k_prior << "\n";
        if (prior == PriorKind::dpm) o << "alpha = " << num(alpha) << "\n";
        if (prior == PriorKind::dpm_hyper) o << "alpha_rate = " << num(alpha_rate) << "\n";
        o << "[mcmc]\niters = " << mcmc.iters << "\nburnin = " << mcmc.burnin << "\nthin = " << mcmc.thin
          << "\nchains = " << mcmc.chains << "\nseed = " << mcmc.seed << "\nn_split = " << mcmc.n_split
          << "\nn_merge = " << mcmc.n_merge << "\nparam_refresh_per_iter = " << mcmc.param_refresh_per_iter
          << "\nalloc_scans_per_iter = " << mcmc.alloc_scans_per_iter << "\n";
        o << "[summarize]\nmethods = ";
        for (std::size_t i = 0; i < methods.size(); ++i) o << (i ? "," : "") << methods[i];
        if (methods.empty()) o << "all";
        o << "\nk_max = " << (k_max ? std::to_string(*k_max) : "auto") << "\nepsilon = " << num(epsilon)
          << "\nl1 = " << num(l1) << "\nl2 = " << num(l2) << "\n";
        return o.str();
    }
};

}  // namespace bnpmix
