// lcirt command-line front end. Talks to the library only through lcirt.h.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcirt/lcirt.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNotConverged = 3;

struct Failure {
    std::string message;
};

struct Config {
    std::string input;
    std::string output;
    std::string format = "json";
    int missing = 999;

    std::string spec_file;
    int k = 0;
    std::string link;
    std::string disc;
    std::string difl;
    std::string multi;
    std::string multi0;

    std::string start = "deterministic";
    int n_random = -1;
    std::uint64_t seed = 1;
    std::string params_file;
    double tol = 1e-9;
    int max_iter = 5000;
    int threads = 1;
    int fisher_sweeps = 1;
    int cluster_random_starts = 1;
    double alpha = 0.05;

    std::string grid_file;
    std::size_t units = 1000;
    double missing_rate = 0.0;
    std::string truth;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{"cannot open '" + path + "'"};
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw Failure{"cannot write '" + path + "'"};
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

void check(lcirt_status status) {
    if (status != LCIRT_OK) throw Failure{lcirt_last_error()};
}

// Owns a string handed out by the library.
struct CString {
    char* p = nullptr;
    ~CString() { lcirt_free_string(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

Json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Failure{"invalid JSON in " + what + ": " + e.what()};
    }
}

// "1,2;3,4" or a JSON array of 1-based index lists.
Json parse_groups(const std::string& text, const std::string& flag) {
    const auto first = text.find_first_not_of(" \t");
    if (first != std::string::npos && text[first] == '[') return parse_json_text(text, flag);
    Json groups = Json::array();
    std::stringstream outer(text);
    std::string group;
    while (std::getline(outer, group, ';')) {
        Json items = Json::array();
        std::stringstream inner(group);
        std::string item;
        while (std::getline(inner, item, ',')) {
            try {
                std::size_t used = 0;
                const int v = std::stoi(item, &used);
                if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
                items.push_back(v);
            } catch (const std::exception&) {
                throw Failure{flag + ": '" + item + "' is not an item index"};
            }
        }
        groups.push_back(std::move(items));
    }
    return groups;
}

Json build_spec(const Config& cfg, bool need_classes = true) {
    Json spec = cfg.spec_file.empty() ? Json::object() : parse_json_text(read_file(cfg.spec_file), cfg.spec_file);
    if (!spec.is_object()) throw Failure{"spec file must hold a JSON object"};
    if (cfg.k > 0) spec["k"] = cfg.k;
    if (!cfg.link.empty()) spec["link"] = cfg.link;
    if (!cfg.disc.empty()) spec["disc"] = cfg.disc;
    if (!cfg.difl.empty()) spec["difl"] = cfg.difl;
    if (!cfg.multi.empty()) spec["multi"] = parse_groups(cfg.multi, "--multi");
    if (need_classes && !spec.contains("k")) throw Failure{"field 'k' is required (use --k or --spec)"};
    if (!spec.contains("link")) spec["link"] = "global";
    return spec;
}

Json build_options(const Config& cfg) {
    Json opts;
    opts["start"] = cfg.start;
    if (cfg.n_random >= 0) opts["n_random"] = cfg.n_random;
    opts["seed"] = cfg.seed;
    if (!cfg.params_file.empty()) opts["params"] = parse_json_text(read_file(cfg.params_file), cfg.params_file);
    opts["tol"] = cfg.tol;
    opts["max_iter"] = cfg.max_iter;
    opts["threads"] = cfg.threads;
    opts["fisher_sweeps"] = cfg.fisher_sweeps;
    opts["cluster_random_starts"] = cfg.cluster_random_starts;
    return opts;
}

using DatasetPtr = std::unique_ptr<lcirt_dataset, decltype(&lcirt_dataset_free)>;

DatasetPtr load_data(const Config& cfg) {
    lcirt_dataset* raw = nullptr;
    check(lcirt_dataset_load(cfg.input.c_str(), cfg.missing, &raw));
    return DatasetPtr(raw, &lcirt_dataset_free);
}

void require_format(const Config& cfg, std::initializer_list<const char*> allowed) {
    for (const char* f : allowed)
        if (cfg.format == f) return;
    throw Failure{"unsupported --format '" + cfg.format + "' for this command"};
}

int run_aggregate(const Config& cfg) {
    require_format(cfg, {"json"});
    auto data = load_data(cfg);
    CString out;
    check(lcirt_dataset_to_json(data.get(), &out.p));
    write_text(cfg.output, out.str());
    return kExitOk;
}

int run_fit(const Config& cfg) {
    require_format(cfg, {"json", "text"});
    auto data = load_data(cfg);
    const std::string spec = build_spec(cfg).dump();
    const std::string opts = build_options(cfg).dump();
    lcirt_fit* raw = nullptr;
    check(lcirt_fit_run(data.get(), spec.c_str(), opts.c_str(), &raw));
    std::unique_ptr<lcirt_fit, decltype(&lcirt_fit_free)> fit(raw, &lcirt_fit_free);
    CString json, summary;
    check(lcirt_fit_to_json(fit.get(), &json.p));
    check(lcirt_fit_summary(fit.get(), &summary.p));
    if (cfg.output.empty()) {
        write_text("", cfg.format == "json" ? json.str() : summary.str());
    } else {
        write_text(cfg.output, cfg.format == "json" ? json.str() : summary.str());
        std::cout << summary.str();
    }
    return lcirt_fit_converged(fit.get()) ? kExitOk : kExitNotConverged;
}

int run_test_dim(const Config& cfg) {
    require_format(cfg, {"json", "text"});
    auto data = load_data(cfg);
    Json spec_json = build_spec(cfg);
    if (!spec_json.contains("multi")) throw Failure{"test-dim needs the general structure in --multi"};
    const std::string spec = spec_json.dump();
    const std::string multi0 = cfg.multi0.empty() ? std::string() : parse_groups(cfg.multi0, "--multi0").dump();
    const std::string opts = build_options(cfg).dump();
    lcirt_lrtest* raw = nullptr;
    check(lcirt_test_dim(data.get(), spec.c_str(), multi0.empty() ? nullptr : multi0.c_str(), opts.c_str(), &raw));
    std::unique_ptr<lcirt_lrtest, decltype(&lcirt_lrtest_free)> test(raw, &lcirt_lrtest_free);
    CString json, summary;
    check(lcirt_lrtest_to_json(test.get(), &json.p));
    check(lcirt_lrtest_summary(test.get(), &summary.p));
    if (cfg.output.empty()) {
        write_text("", cfg.format == "json" ? json.str() : summary.str());
    } else {
        write_text(cfg.output, cfg.format == "json" ? json.str() : summary.str());
        std::cout << summary.str();
    }
    return lcirt_lrtest_converged(test.get()) ? kExitOk : kExitNotConverged;
}

int run_cluster(const Config& cfg) {
    require_format(cfg, {"json", "text", "dot"});
    auto data = load_data(cfg);
    const std::string spec = build_spec(cfg).dump();
    const std::string opts = build_options(cfg).dump();
    lcirt_trace* raw = nullptr;
    check(lcirt_class_item(data.get(), spec.c_str(), opts.c_str(), &raw));
    std::unique_ptr<lcirt_trace, decltype(&lcirt_trace_free)> trace(raw, &lcirt_trace_free);
    CString out;
    if (cfg.format == "json")
        check(lcirt_trace_to_json(trace.get(), &out.p));
    else if (cfg.format == "dot")
        check(lcirt_trace_to_dot(trace.get(), &out.p));
    else
        check(lcirt_trace_to_text(trace.get(), &out.p));
    write_text(cfg.output, out.str());
    std::cerr << "suggested dimensions (alpha " << cfg.alpha << "): "
              << lcirt_trace_suggest_cut(trace.get(), cfg.alpha) << "\n";
    return lcirt_trace_converged(trace.get()) ? kExitOk : kExitNotConverged;
}

int run_grid(const Config& cfg) {
    require_format(cfg, {"json", "text"});
    if (cfg.grid_file.empty()) throw Failure{"grid needs --grid FILE (JSON array of specs)"};
    auto data = load_data(cfg);
    const Json grid = parse_json_text(read_file(cfg.grid_file), cfg.grid_file);
    const std::string specs = grid.dump();
    const std::string opts = build_options(cfg).dump();
    CString json, text;
    int converged = 0;
    check(lcirt_information_table(data.get(), specs.c_str(), opts.c_str(), &json.p, &text.p, &converged));
    write_text(cfg.output, cfg.format == "json" ? json.str() : text.str());
    return converged ? kExitOk : kExitNotConverged;
}

int run_simulate(const Config& cfg) {
    if (cfg.params_file.empty()) throw Failure{"simulate needs --params FILE"};
    const std::string spec = build_spec(cfg).dump();
    const std::string params = read_file(cfg.params_file);
    CString csv, truth;
    check(lcirt_simulate(spec.c_str(), params.c_str(), cfg.units, cfg.seed, cfg.missing_rate, &csv.p,
                         cfg.truth.empty() ? nullptr : &truth.p));
    write_text(cfg.output, csv.str());
    if (!cfg.truth.empty()) write_text(cfg.truth, truth.str());
    return kExitOk;
}

void add_spec_flags(CLI::App* cmd, Config& cfg) {
    cmd->add_option("--spec", cfg.spec_file, "Model spec JSON file; flags below override its fields");
    cmd->add_option("--k", cfg.k, "Number of latent classes")->check(CLI::PositiveNumber);
    cmd->add_option("--link", cfg.link, "none | global | local");
    cmd->add_option("--disc", cfg.disc, "constrained | free");
    cmd->add_option("--difl", cfg.difl, "free | rating_scale");
    cmd->add_option("--multi", cfg.multi, "Dimension groups, e.g. \"1,2,3;4,5\" (1-based)");
}

void add_start_flags(CLI::App* cmd, Config& cfg) {
    cmd->add_option("--start", cfg.start, "deterministic | random | user");
    cmd->add_option("--n-random", cfg.n_random, "Random starts (seeds seed, seed+1, ...)");
    cmd->add_option("--seed", cfg.seed, "Base seed");
    cmd->add_option("--params", cfg.params_file, "Starting parameters JSON (with --start user)");
    cmd->add_option("--tol", cfg.tol, "Relative log-likelihood tolerance");
    cmd->add_option("--max-iter", cfg.max_iter, "EM iteration cap");
    cmd->add_option("--fisher-sweeps", cfg.fisher_sweeps, "Fisher-scoring sweeps per EM iteration");
    cmd->add_option("--threads", cfg.threads, "Worker threads (default $LCIRT_THREADS or 1)");
}

void add_io_flags(CLI::App* cmd, Config& cfg) {
    cmd->add_option("input", cfg.input, "Response CSV or response-matrix JSON")->required();
    cmd->add_option("--missing", cfg.missing, "Missing-value code in CSV input");
    cmd->add_option("-o,--output", cfg.output, "Output file (default stdout)");
    cmd->add_option("--format", cfg.format, "json | text | dot");
}

}  // namespace

int main(int argc, char** argv) {
    Config cfg;
    if (const char* env = std::getenv("LCIRT_THREADS")) {
        try {
            cfg.threads = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring LCIRT_THREADS='" << env << "'\n";
        }
    }

    CLI::App app{"Multidimensional latent-class IRT models: estimation and model selection"};
    app.set_version_flag("--version", std::string(lcirt_version()));
    app.require_subcommand(1);

    auto* aggregate = app.add_subcommand("aggregate", "Collapse a unit-level CSV into response patterns");
    add_io_flags(aggregate, cfg);

    auto* fit = app.add_subcommand("fit", "Fit one model");
    add_io_flags(fit, cfg);
    add_spec_flags(fit, cfg);
    add_start_flags(fit, cfg);

    auto* test_dim = app.add_subcommand("test-dim", "LR test of a dimension structure against a finer one");
    add_io_flags(test_dim, cfg);
    add_spec_flags(test_dim, cfg);
    add_start_flags(test_dim, cfg);
    test_dim->add_option("--multi0", cfg.multi0, "Restricted structure (default: one dimension)");

    auto* cluster = app.add_subcommand("cluster", "Hierarchical clustering of items into dimensions");
    add_io_flags(cluster, cfg);
    add_spec_flags(cluster, cfg);
    add_start_flags(cluster, cfg);
    cluster->add_option("--cluster-random-starts", cfg.cluster_random_starts,
                        "Random starts per candidate merge");
    cluster->add_option("--alpha", cfg.alpha, "Level for the suggested cut");

    auto* grid = app.add_subcommand("grid", "Fit a grid of specs and rank them by BIC");
    add_io_flags(grid, cfg);
    add_start_flags(grid, cfg);
    grid->add_option("--grid", cfg.grid_file, "JSON array of model specs")->required();

    auto* simulate = app.add_subcommand("simulate", "Sample responses from a fully specified model");
    add_spec_flags(simulate, cfg);
    simulate->add_option("--params", cfg.params_file, "Parameter JSON")->required();
    simulate->add_option("--units", cfg.units, "Sample size")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", cfg.seed, "Seed");
    simulate->add_option("--missing-rate", cfg.missing_rate, "Probability that a cell is missing");
    simulate->add_option("-o,--output", cfg.output, "CSV output (default stdout)");
    simulate->add_option("--truth", cfg.truth, "Truth JSON output (spec, params, classes)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*aggregate) return run_aggregate(cfg);
        if (*fit) return run_fit(cfg);
        if (*test_dim) return run_test_dim(cfg);
        if (*cluster) return run_cluster(cfg);
        if (*grid) return run_grid(cfg);
        if (*simulate) return run_simulate(cfg);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}
