#include "lcirt/lcirt.h"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "lcirt/error.hpp"
#include "lcirt/serialize.hpp"

struct lcirt_dataset {
    lcirt::ResponseMatrix data;
};

struct lcirt_fit {
    lcirt::FitResult result;
};

struct lcirt_lrtest {
    lcirt::LrTestResult result;
};

struct lcirt_trace {
    lcirt::ClusterTrace result;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
lcirt_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return LCIRT_OK;
    } catch (const lcirt::ValidationError& e) {
        g_last_error = e.what();
        return LCIRT_VALIDATION_ERROR;
    } catch (const lcirt::IoError& e) {
        g_last_error = e.what();
        return LCIRT_IO_ERROR;
    } catch (const lcirt::NumericError& e) {
        g_last_error = e.what();
        return LCIRT_NUMERIC_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return LCIRT_INTERNAL_ERROR;
    } catch (...) {
        g_last_error = "unknown error";
        return LCIRT_INTERNAL_ERROR;
    }
}

lcirt_status null_argument(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return LCIRT_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

struct ParsedOptions {
    lcirt::StartPolicy policy;
    lcirt::FitOptions fit;
    lcirt::ClusterOptions cluster;
};

lcirt::Json options_json(const char* text) {
    if (!text || !*text) return lcirt::Json::object();
    lcirt::Json j = lcirt::parse_json(text, "options");
    if (!j.is_object()) throw lcirt::ValidationError("options must be a JSON object");
    return j;
}

ParsedOptions parse_options(const lcirt::Json& j, const lcirt::ModelSpec* spec) {
    ParsedOptions out;
    std::string start = "deterministic";
    if (j.contains("start")) {
        const auto& s = j.at("start");
        start = s.is_string() ? s.get<std::string>() : std::to_string(s.get<int>());
    }
    int n_random = 0;
    if (start == "random" || start == "1") n_random = 1;
    if (j.contains("n_random")) n_random = j.at("n_random").get<int>();
    if (n_random < 0) throw lcirt::ValidationError("field 'n_random' must be nonnegative");
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    out.policy.seeds.clear();
    for (int i = 0; i < n_random; ++i) out.policy.seeds.push_back(seed + static_cast<std::uint64_t>(i));
    if (start == "deterministic" || start == "0") {
        out.policy.deterministic = true;
    } else if (start == "random" || start == "1") {
        out.policy.deterministic = false;
    } else if (start == "user" || start == "2") {
        out.policy.deterministic = false;
        if (!j.contains("params")) throw lcirt::ValidationError("start 'user' needs field 'params'");
        if (!spec) throw lcirt::ValidationError("start 'user' is not available here");
        out.policy.user = lcirt::params_from_json(*spec, j.at("params"));
    } else {
        throw lcirt::ValidationError("field 'start' must be deterministic, random or user");
    }
    out.fit.tol = j.value("tol", out.fit.tol);
    out.fit.max_iter = j.value("max_iter", out.fit.max_iter);
    out.fit.threads = j.value("threads", out.fit.threads);
    out.fit.fisher_sweeps = j.value("fisher_sweeps", out.fit.fisher_sweeps);
    out.cluster.random_starts = j.value("cluster_random_starts", out.cluster.random_starts);
    out.cluster.seed = seed;
    if (!(out.fit.tol > 0.0)) throw lcirt::ValidationError("field 'tol' must be positive");
    if (out.fit.max_iter < 1) throw lcirt::ValidationError("field 'max_iter' must be at least 1");
    if (out.fit.fisher_sweeps < 1) throw lcirt::ValidationError("field 'fisher_sweeps' must be at least 1");
    return out;
}

ParsedOptions parse_options_checked(const char* text, const lcirt::ModelSpec* spec) {
    try {
        return parse_options(options_json(text), spec);
    } catch (const nlohmann::json::exception& e) {
        throw lcirt::ValidationError(std::string("invalid options: ") + e.what());
    }
}

lcirt::ModelSpec spec_for(const lcirt_dataset* data, const char* spec_json) {
    const lcirt::Json j = lcirt::parse_json(spec_json, "model spec");
    lcirt::ModelSpec spec = lcirt::spec_from_json(j, data->data.cats);
    lcirt::check_compatible(spec, data->data);
    return spec;
}

bool looks_like_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lcirt::IoError("cannot open '" + path + "'");
    char c = 0;
    while (in.get(c))
        if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
    return false;
}

}  // namespace

extern "C" {

const char* lcirt_version(void) { return "1.0.0"; }

const char* lcirt_last_error(void) { return g_last_error.c_str(); }

void lcirt_free_string(char* s) { std::free(s); }

lcirt_status lcirt_dataset_from_csv(const char* path, int missing_code, lcirt_dataset** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    return guarded([&] {
        auto ds = std::make_unique<lcirt_dataset>();
        ds->data = lcirt::aggregate(lcirt::read_csv(path, missing_code));
        *out = ds.release();
    });
}

lcirt_status lcirt_dataset_from_json(const char* json, lcirt_dataset** out) {
    if (!json) return null_argument("json");
    if (!out) return null_argument("out");
    return guarded([&] {
        auto ds = std::make_unique<lcirt_dataset>();
        ds->data = lcirt::response_matrix_from_json(lcirt::parse_json(json, "response matrix"));
        *out = ds.release();
    });
}

lcirt_status lcirt_dataset_load(const char* path, int missing_code, lcirt_dataset** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    return guarded([&] {
        auto ds = std::make_unique<lcirt_dataset>();
        if (looks_like_json(path)) {
            std::ifstream in(path);
            std::stringstream buf;
            buf << in.rdbuf();
            ds->data = lcirt::response_matrix_from_json(lcirt::parse_json(buf.str(), path));
        } else {
            ds->data = lcirt::aggregate(lcirt::read_csv(path, missing_code));
        }
        *out = ds.release();
    });
}

lcirt_status lcirt_dataset_from_cells(const int* cells, size_t units, size_t items, int missing_code,
                                      lcirt_dataset** out) {
    if (!cells) return null_argument("cells");
    if (!out) return null_argument("out");
    return guarded([&] {
        if (units == 0 || items == 0) throw lcirt::ValidationError("response matrix is empty");
        lcirt::RawResponses raw(units, items);
        raw.missing_code = missing_code;
        for (size_t i = 0; i < units; ++i)
            for (size_t j = 0; j < items; ++j) {
                const int v = cells[i * items + j];
                if (v == missing_code)
                    raw.set_missing(i, j);
                else
                    raw.set(i, j, v);
            }
        auto ds = std::make_unique<lcirt_dataset>();
        ds->data = lcirt::aggregate(raw);
        *out = ds.release();
    });
}

void lcirt_dataset_free(lcirt_dataset* data) { delete data; }

size_t lcirt_dataset_units(const lcirt_dataset* data) {
    return data ? static_cast<size_t>(data->data.units()) : 0;
}

size_t lcirt_dataset_patterns(const lcirt_dataset* data) { return data ? data->data.patterns() : 0; }

size_t lcirt_dataset_items(const lcirt_dataset* data) { return data ? data->data.items : 0; }

lcirt_status lcirt_dataset_set_categories(lcirt_dataset* data, const int* cats, size_t items) {
    if (!data) return null_argument("data");
    if (!cats) return null_argument("cats");
    return guarded([&] {
        if (items != data->data.items)
            throw lcirt::ValidationError("category vector has " + std::to_string(items) + " entries for " +
                                         std::to_string(data->data.items) + " items");
        std::vector<int> next(cats, cats + items);
        for (size_t p = 0; p < data->data.patterns(); ++p)
            for (size_t j = 0; j < items; ++j)
                if (data->data.observed(p, j) && data->data.code(p, j) >= next[j])
                    throw lcirt::ValidationError("item " + std::to_string(j + 1) + " has code " +
                                                 std::to_string(data->data.code(p, j)) +
                                                 " outside the given category count");
        data->data.cats = std::move(next);
    });
}

lcirt_status lcirt_dataset_to_json(const lcirt_dataset* data, char** out) {
    if (!data) return null_argument("data");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::to_json(data->data).dump(2)); });
}

lcirt_status lcirt_fit_run(const lcirt_dataset* data, const char* spec_json, const char* options_json,
                           lcirt_fit** out) {
    if (!data) return null_argument("data");
    if (!spec_json) return null_argument("spec_json");
    if (!out) return null_argument("out");
    return guarded([&] {
        const lcirt::ModelSpec spec = spec_for(data, spec_json);
        const ParsedOptions opts = parse_options_checked(options_json, &spec);
        auto f = std::make_unique<lcirt_fit>();
        f->result = lcirt::fit(spec, data->data, opts.policy, opts.fit);
        *out = f.release();
    });
}

void lcirt_fit_free(lcirt_fit* fit) { delete fit; }
double lcirt_fit_loglik(const lcirt_fit* fit) { return fit ? fit->result.loglik : 0.0; }
int lcirt_fit_n_params(const lcirt_fit* fit) { return fit ? fit->result.n_params : 0; }
double lcirt_fit_aic(const lcirt_fit* fit) { return fit ? fit->result.aic : 0.0; }
double lcirt_fit_bic(const lcirt_fit* fit) { return fit ? fit->result.bic : 0.0; }
int lcirt_fit_iterations(const lcirt_fit* fit) { return fit ? fit->result.iterations : 0; }
int lcirt_fit_converged(const lcirt_fit* fit) { return fit && fit->result.converged ? 1 : 0; }

lcirt_status lcirt_fit_to_json(const lcirt_fit* fit, char** out) {
    if (!fit) return null_argument("fit");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::to_json(fit->result).dump(2)); });
}

lcirt_status lcirt_fit_summary(const lcirt_fit* fit, char** out) {
    if (!fit) return null_argument("fit");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::fit_summary(fit->result)); });
}

lcirt_status lcirt_compare_nested(const lcirt_fit* restricted, const lcirt_fit* general, lcirt_lrtest** out) {
    if (!restricted) return null_argument("restricted");
    if (!general) return null_argument("general");
    if (!out) return null_argument("out");
    return guarded([&] {
        auto t = std::make_unique<lcirt_lrtest>();
        t->result = lcirt::compare_nested(restricted->result, general->result);
        *out = t.release();
    });
}

lcirt_status lcirt_test_dim(const lcirt_dataset* data, const char* spec_json, const char* multi0_json,
                            const char* options_json, lcirt_lrtest** out) {
    if (!data) return null_argument("data");
    if (!spec_json) return null_argument("spec_json");
    if (!out) return null_argument("out");
    return guarded([&] {
        const lcirt::ModelSpec spec = spec_for(data, spec_json);
        std::vector<std::vector<int>> groups0 =
            multi0_json && *multi0_json
                ? lcirt::groups_from_json(lcirt::parse_json(multi0_json, "multi0"), spec.items())
                : lcirt::unidimensional(spec.items());
        const ParsedOptions opts = parse_options_checked(options_json, nullptr);
        auto t = std::make_unique<lcirt_lrtest>();
        t->result = lcirt::test_dim(data->data, spec, groups0, opts.policy, opts.fit);
        *out = t.release();
    });
}

void lcirt_lrtest_free(lcirt_lrtest* test) { delete test; }
double lcirt_lrtest_deviance(const lcirt_lrtest* test) { return test ? test->result.deviance : 0.0; }
int lcirt_lrtest_df(const lcirt_lrtest* test) { return test ? test->result.df : 0; }
double lcirt_lrtest_p_value(const lcirt_lrtest* test) { return test ? test->result.p_value : 1.0; }
int lcirt_lrtest_converged(const lcirt_lrtest* test) {
    return test && test->result.fit0.converged && test->result.fit1.converged ? 1 : 0;
}

lcirt_status lcirt_lrtest_to_json(const lcirt_lrtest* test, char** out) {
    if (!test) return null_argument("test");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::to_json(test->result).dump(2)); });
}

lcirt_status lcirt_lrtest_summary(const lcirt_lrtest* test, char** out) {
    if (!test) return null_argument("test");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::lr_summary(test->result)); });
}

lcirt_status lcirt_class_item(const lcirt_dataset* data, const char* spec_json, const char* options_json,
                              lcirt_trace** out) {
    if (!data) return null_argument("data");
    if (!spec_json) return null_argument("spec_json");
    if (!out) return null_argument("out");
    return guarded([&] {
        const lcirt::ModelSpec spec = spec_for(data, spec_json);
        const ParsedOptions opts = parse_options_checked(options_json, nullptr);
        auto t = std::make_unique<lcirt_trace>();
        t->result = lcirt::class_item(data->data, spec, opts.policy, opts.fit, opts.cluster);
        *out = t.release();
    });
}

void lcirt_trace_free(lcirt_trace* trace) { delete trace; }

size_t lcirt_trace_steps(const lcirt_trace* trace) { return trace ? trace->result.steps.size() : 0; }

lcirt_status lcirt_trace_merge(const lcirt_trace* trace, size_t step, int* left, int* right, double* height) {
    if (!trace) return null_argument("trace");
    if (step >= trace->result.steps.size()) {
        g_last_error = "step index out of range";
        return LCIRT_INVALID_ARGUMENT;
    }
    const auto& s = trace->result.steps[step];
    if (left) *left = s.left;
    if (right) *right = s.right;
    if (height) *height = s.height;
    return LCIRT_OK;
}

int lcirt_trace_suggest_cut(const lcirt_trace* trace, double alpha) {
    return trace ? lcirt::suggest_cut(trace->result, alpha) : 0;
}

int lcirt_trace_converged(const lcirt_trace* trace) {
    if (!trace || !trace->result.base_converged) return 0;
    for (const auto& s : trace->result.steps)
        if (!s.converged) return 0;
    return 1;
}

lcirt_status lcirt_trace_to_json(const lcirt_trace* trace, char** out) {
    if (!trace) return null_argument("trace");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::to_json(trace->result).dump(2)); });
}

lcirt_status lcirt_trace_to_dot(const lcirt_trace* trace, char** out) {
    if (!trace) return null_argument("trace");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::dendrogram_dot(trace->result)); });
}

lcirt_status lcirt_trace_to_text(const lcirt_trace* trace, char** out) {
    if (!trace) return null_argument("trace");
    if (!out) return null_argument("out");
    return guarded([&] { *out = dup_string(lcirt::merge_table_text(trace->result)); });
}

lcirt_status lcirt_information_table(const lcirt_dataset* data, const char* specs_json,
                                     const char* options_json, char** table_json, char** table_text,
                                     int* all_converged) {
    if (!data) return null_argument("data");
    if (!specs_json) return null_argument("specs_json");
    return guarded([&] {
        const lcirt::Json specs = lcirt::parse_json(specs_json, "spec grid");
        if (!specs.is_array() || specs.empty())
            throw lcirt::ValidationError("spec grid must be a non-empty JSON array");
        const ParsedOptions opts = parse_options_checked(options_json, nullptr);
        std::vector<lcirt::FitResult> fits;
        bool converged = true;
        for (const auto& s : specs) {
            lcirt::ModelSpec spec = lcirt::spec_from_json(s, data->data.cats);
            lcirt::check_compatible(spec, data->data);
            fits.push_back(lcirt::fit(spec, data->data, opts.policy, opts.fit));
            converged = converged && fits.back().converged;
        }
        const auto rows = lcirt::information_table(fits);
        if (table_json) *table_json = dup_string(lcirt::to_json(rows).dump(2));
        if (table_text) *table_text = dup_string(lcirt::info_table_text(rows));
        if (all_converged) *all_converged = converged ? 1 : 0;
    });
}

lcirt_status lcirt_simulate(const char* spec_json, const char* params_json, size_t units, uint64_t seed,
                            double missing_rate, char** csv, char** truth_json) {
    if (!spec_json) return null_argument("spec_json");
    if (!params_json) return null_argument("params_json");
    return guarded([&] {
        lcirt::SimulationPlan plan;
        plan.spec = lcirt::spec_from_json(lcirt::parse_json(spec_json, "model spec"));
        plan.params = lcirt::params_from_json(plan.spec, lcirt::parse_json(params_json, "parameters"));
        plan.units = units;
        plan.seed = seed;
        plan.missing_rate = missing_rate;
        const lcirt::Simulation sim = lcirt::simulate(plan);
        if (csv) *csv = dup_string(lcirt::to_csv(sim.responses));
        if (truth_json) {
            lcirt::Json truth;
            truth["spec"] = lcirt::to_json(plan.spec);
            truth["params"] = lcirt::to_json(plan.spec, plan.params);
            truth["units"] = units;
            truth["seed"] = seed;
            truth["missing_rate"] = missing_rate;
            lcirt::Json labels = lcirt::Json::array();
            for (int c : sim.classes) labels.push_back(c + 1);
            truth["classes"] = std::move(labels);
            *truth_json = dup_string(truth.dump(2));
        }
    });
}

}  // extern "C"
