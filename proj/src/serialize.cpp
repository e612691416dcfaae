#include "lcirt/serialize.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "lcirt/error.hpp"

namespace lcirt {

namespace {

Json vec(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json rows(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

const Json& field(const Json& j, const char* name) {
    if (!j.is_object() || !j.contains(name))
        throw ValidationError(std::string("missing field '") + name + "'");
    return j.at(name);
}

Eigen::VectorXd read_vec(const Json& j, const std::string& name) {
    if (!j.is_array()) throw ValidationError("field '" + name + "' must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError("field '" + name + "' must contain numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd read_rows(const Json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) throw ValidationError("field '" + name + "' must be a non-empty matrix");
    const Eigen::VectorXd first = read_vec(j[0], name);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), first.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Eigen::VectorXd row = read_vec(j[i], name);
        if (row.size() != first.size()) throw ValidationError("field '" + name + "' has ragged rows");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

int read_int(const Json& j, const std::string& name) {
    if (!j.is_number_integer()) throw ValidationError("field '" + name + "' must be an integer");
    return j.get<int>();
}

Json phi_json(const std::vector<Eigen::MatrixXd>& probs) {
    Json a = Json::array();
    for (const auto& item : probs) a.push_back(rows(item));
    return a;
}

}  // namespace

Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + what + ": " + e.what());
    }
}

Json to_json(const ResponseMatrix& data) {
    Json j;
    j["items"] = data.items;
    j["units"] = data.units();
    j["cats"] = data.cats;
    Json patterns = Json::array();
    for (std::size_t p = 0; p < data.patterns(); ++p) {
        Json row = Json::array();
        for (std::size_t c = 0; c < data.items; ++c)
            row.push_back(data.observed(p, c) ? Json(data.code(p, c)) : Json(nullptr));
        patterns.push_back(std::move(row));
    }
    j["patterns"] = std::move(patterns);
    Json freq = Json::array();
    for (double f : data.freq) freq.push_back(static_cast<long long>(f));
    j["freq"] = std::move(freq);
    Json labels = Json::array();
    for (auto l : data.labels) labels.push_back(l + 1);
    j["labels"] = std::move(labels);
    return j;
}

ResponseMatrix response_matrix_from_json(const Json& j) {
    ResponseMatrix out;
    const Json& patterns = field(j, "patterns");
    const Json& freq = field(j, "freq");
    if (!patterns.is_array() || patterns.empty()) throw ValidationError("field 'patterns' must be a non-empty array");
    if (!freq.is_array() || freq.size() != patterns.size())
        throw ValidationError("field 'freq' must have one entry per pattern");
    out.items = patterns[0].size();
    if (out.items == 0) throw ValidationError("field 'patterns' has empty rows");
    for (std::size_t p = 0; p < patterns.size(); ++p) {
        if (!patterns[p].is_array() || patterns[p].size() != out.items)
            throw ValidationError("field 'patterns' row " + std::to_string(p + 1) + " has the wrong length");
        for (const auto& cell : patterns[p]) {
            if (cell.is_null()) {
                out.codes.push_back(-1);
                out.missing.push_back(1);
            } else {
                const int v = read_int(cell, "patterns");
                if (v < 0) throw ValidationError("field 'patterns' has a negative code");
                out.codes.push_back(v);
                out.missing.push_back(0);
            }
        }
        const double f = freq[p].is_number() ? freq[p].get<double>() : -1.0;
        if (!(f > 0.0) || f != std::floor(f)) throw ValidationError("field 'freq' must hold positive integers");
        out.freq.push_back(f);
    }
    if (j.contains("labels")) {
        for (const auto& l : j.at("labels")) {
            const int v = read_int(l, "labels");
            if (v < 1 || static_cast<std::size_t>(v) > out.patterns())
                throw ValidationError("field 'labels' entry out of range");
            out.labels.push_back(static_cast<std::size_t>(v - 1));
        }
    }
    std::vector<int> inferred(out.items, 0);
    for (std::size_t p = 0; p < out.patterns(); ++p)
        for (std::size_t c = 0; c < out.items; ++c)
            if (out.observed(p, c)) inferred[c] = std::max(inferred[c], out.code(p, c) + 1);
    if (j.contains("cats")) {
        for (const auto& c : j.at("cats")) out.cats.push_back(read_int(c, "cats"));
        if (out.cats.size() != out.items) throw ValidationError("field 'cats' must have one entry per item");
        for (std::size_t c = 0; c < out.items; ++c)
            if (inferred[c] > out.cats[c])
                throw ValidationError("field 'patterns' has a code outside the range given in 'cats' for item " +
                                      std::to_string(c + 1));
    } else {
        out.cats = inferred;
    }
    return out;
}

Json groups_to_json(const std::vector<std::vector<int>>& groups) {
    Json a = Json::array();
    for (const auto& g : groups) {
        Json row = Json::array();
        for (int j : g) row.push_back(j + 1);
        a.push_back(std::move(row));
    }
    return a;
}

std::vector<std::vector<int>> groups_from_json(const Json& j, int items) {
    if (!j.is_array() || j.empty()) throw ValidationError("field 'multi' must be a non-empty list of item lists");
    std::vector<std::vector<int>> groups;
    for (const auto& g : j) {
        if (!g.is_array()) throw ValidationError("field 'multi' must be a list of item lists");
        std::vector<int> group;
        for (const auto& item : g) {
            const int v = read_int(item, "multi");
            if (v < 1 || v > items)
                throw ValidationError("field 'multi' item " + std::to_string(v) + " out of range 1.." +
                                      std::to_string(items));
            group.push_back(v - 1);
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

Json to_json(const ModelSpec& spec) {
    Json j;
    j["k"] = spec.classes;
    j["link"] = to_string(spec.link);
    j["disc"] = spec.disc == Discrimination::Free ? "free" : "constrained";
    j["difl"] = spec.difl == Difficulty::Free ? "free" : "rating_scale";
    j["multi"] = groups_to_json(spec.groups);
    j["cats"] = spec.cats;
    return j;
}

ModelSpec spec_from_json(const Json& j, const std::optional<std::vector<int>>& cats_default) {
    if (!j.is_object()) throw ValidationError("model spec must be a JSON object");
    ModelSpec spec;
    spec.classes = read_int(field(j, "k"), "k");
    if (j.contains("link")) {
        const Json& l = j.at("link");
        spec.link = parse_link(l.is_string() ? l.get<std::string>() : std::to_string(read_int(l, "link")));
    }
    if (j.contains("disc")) {
        const Json& d = j.at("disc");
        const std::string v = d.is_string() ? d.get<std::string>() : std::to_string(read_int(d, "disc"));
        if (v == "free" || v == "1")
            spec.disc = Discrimination::Free;
        else if (v == "constrained" || v == "0")
            spec.disc = Discrimination::Constrained;
        else
            throw ValidationError("field 'disc' must be 'free' or 'constrained'");
    }
    if (j.contains("difl")) {
        const Json& d = j.at("difl");
        const std::string v = d.is_string() ? d.get<std::string>() : std::to_string(read_int(d, "difl"));
        if (v == "free" || v == "0")
            spec.difl = Difficulty::Free;
        else if (v == "rating_scale" || v == "rs" || v == "1")
            spec.difl = Difficulty::RatingScale;
        else
            throw ValidationError("field 'difl' must be 'free' or 'rating_scale'");
    }
    if (j.contains("cats")) {
        for (const auto& c : j.at("cats")) spec.cats.push_back(read_int(c, "cats"));
    } else if (cats_default) {
        spec.cats = *cats_default;
    } else {
        throw ValidationError("missing field 'cats' (no data to infer category counts from)");
    }
    if (j.contains("multi"))
        spec.groups = groups_from_json(j.at("multi"), spec.items());
    else
        spec.groups = unidimensional(spec.items());
    spec.validate();
    return spec;
}

Json to_json(const ModelSpec& spec, const ParameterSet& p) {
    Json j;
    j["piv"] = vec(p.weights);
    if (spec.is_latent_class()) {
        j["Phi"] = phi_json(p.class_probs);
        return j;
    }
    j["Th"] = rows(p.support);
    if (spec.difl == Difficulty::Free) {
        Json bec = Json::array();
        for (const auto& b : p.thresholds) bec.push_back(vec(b));
        j["Bec"] = std::move(bec);
    } else {
        j["Bec"] = {{"beta", vec(p.item_location)}, {"tau", vec(p.category_step)}};
    }
    j["gac"] = vec(p.discrimination);
    return j;
}

ParameterSet params_from_json(const ModelSpec& spec, const Json& j) {
    ParameterSet p;
    p.weights = read_vec(field(j, "piv"), "piv");
    if (spec.is_latent_class()) {
        const Json& phi = field(j, "Phi");
        if (!phi.is_array()) throw ValidationError("field 'Phi' must be an array");
        for (const auto& item : phi) p.class_probs.push_back(read_rows(item, "Phi"));
    } else {
        p.support = read_rows(field(j, "Th"), "Th");
        const Json& bec = field(j, "Bec");
        if (spec.difl == Difficulty::Free) {
            if (!bec.is_array()) throw ValidationError("field 'Bec' must be a list of per-item arrays");
            for (const auto& b : bec) p.thresholds.push_back(read_vec(b, "Bec"));
        } else {
            p.item_location = read_vec(field(bec, "beta"), "Bec.beta");
            p.category_step = read_vec(field(bec, "tau"), "Bec.tau");
        }
        p.discrimination = j.contains("gac") ? read_vec(j.at("gac"), "gac")
                                             : Eigen::VectorXd::Ones(spec.items());
    }
    validate_params(spec, p);
    return p;
}

namespace {

Json start_json(const StartRecord& s) {
    Json j;
    j["kind"] = to_string(s.kind);
    if (s.kind == StartKind::Random) j["seed"] = s.seed;
    j["lk"] = number_or_null(s.loglik);
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    if (!s.error.empty()) j["error"] = s.error;
    return j;
}

}  // namespace

Json to_json(const FitResult& fit) {
    Json j;
    j["spec"] = to_json(fit.spec);
    j["lk"] = fit.loglik;
    j["np"] = fit.n_params;
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    j["n"] = fit.units;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["start"] = start_json(fit.start);
    Json starts = Json::array();
    for (const auto& s : fit.starts) starts.push_back(start_json(s));
    j["starts"] = std::move(starts);
    j["params"] = to_json(fit.spec, fit.params);
    if (!fit.spec.is_latent_class()) {
        Json fv = Json::array();
        for (int r : fit.spec.reference_items()) fv.push_back(r + 1);
        j["fv"] = std::move(fv);
    }
    j["Phi"] = phi_json(fit.probs.items);
    j["Pp"] = rows(fit.posterior);
    j["warnings"] = fit.warnings;
    return j;
}

Json to_json(const LrTestResult& test) {
    Json j;
    j["lk0"] = test.lk0;
    j["lk1"] = test.lk1;
    j["dev"] = test.deviance;
    j["df"] = test.df;
    j["pv"] = test.p_value;
    j["out0"] = to_json(test.fit0);
    j["out1"] = to_json(test.fit1);
    return j;
}

Json to_json(const ClusterTrace& trace) {
    Json j;
    j["items"] = trace.items;
    j["base_lk"] = trace.base_loglik;
    j["base_np"] = trace.base_params;
    Json merge = Json::array(), height = Json::array(), step_lr = Json::array(), lk = Json::array(),
         np = Json::array(), groups = Json::array(), conv = Json::array(), pv = Json::array();
    const auto p = step_p_values(trace);
    for (std::size_t h = 0; h < trace.steps.size(); ++h) {
        const auto& s = trace.steps[h];
        merge.push_back({s.left, s.right});
        height.push_back(s.height);
        step_lr.push_back(s.step_lr);
        lk.push_back(s.loglik);
        np.push_back(s.n_params);
        groups.push_back(groups_to_json(s.groups));
        conv.push_back(s.converged);
        pv.push_back(p[h]);
    }
    j["merge"] = std::move(merge);
    j["height"] = std::move(height);
    j["step_lr"] = std::move(step_lr);
    j["pv"] = std::move(pv);
    j["lk"] = std::move(lk);
    j["np"] = std::move(np);
    j["order"] = trace.order;
    j["groups"] = std::move(groups);
    j["converged"] = std::move(conv);
    return j;
}

Json to_json(std::span<const InfoRow> table) {
    Json a = Json::array();
    for (const auto& r : table) {
        Json j;
        j["model"] = r.spec.describe();
        j["spec"] = to_json(r.spec);
        j["lk"] = r.loglik;
        j["np"] = r.n_params;
        j["aic"] = r.aic;
        j["bic"] = r.bic;
        a.push_back(std::move(j));
    }
    return a;
}

std::string fit_summary(const FitResult& fit) {
    std::ostringstream out;
    out << std::fixed;
    out << "model:      " << fit.spec.describe() << '\n';
    out << "lk:         " << std::setprecision(3) << fit.loglik << '\n';
    out << "np:         " << fit.n_params << '\n';
    out << "aic:        " << fit.aic << '\n';
    out << "bic:        " << fit.bic << '\n';
    out << "iterations: " << fit.iterations << (fit.converged ? " (converged)" : " (not converged)") << '\n';
    out << "start:      " << to_string(fit.start.kind);
    if (fit.start.kind == StartKind::Random) out << " seed " << fit.start.seed;
    out << '\n' << std::setprecision(4);
    out << "piv:       ";
    for (Eigen::Index c = 0; c < fit.params.weights.size(); ++c) out << ' ' << fit.params.weights(c);
    out << '\n';
    if (!fit.spec.is_latent_class()) {
        for (Eigen::Index d = 0; d < fit.params.support.cols(); ++d) {
            out << "Th[" << (d + 1) << "]:     ";
            for (Eigen::Index c = 0; c < fit.params.support.rows(); ++c) out << ' ' << fit.params.support(c, d);
            out << '\n';
        }
    }
    for (const auto& w : fit.warnings) out << "warning:    " << w << '\n';
    return out.str();
}

std::string lr_summary(const LrTestResult& t) {
    std::ostringstream out;
    out << std::fixed;
    out << "Log-likelihood of the constrained model =   " << std::setprecision(4) << t.lk0 << '\n';
    out << "Log-likelihood of the unconstrained model = " << t.lk1 << '\n';
    out << "Deviance =                                   " << t.deviance << '\n';
    out << "Degrees of freedom =                         " << t.df << '\n';
    out << "P-value =                                    " << t.p_value << '\n';
    return out.str();
}

std::string info_table_text(std::span<const InfoRow> table) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    out << std::left << std::setw(44) << "model" << std::right << std::setw(12) << "lk" << std::setw(6)
        << "np" << std::setw(12) << "aic" << std::setw(12) << "bic" << '\n';
    for (const auto& r : table)
        out << std::left << std::setw(44) << r.spec.describe() << std::right << std::setw(12) << r.loglik
            << std::setw(6) << r.n_params << std::setw(12) << r.aic << std::setw(12) << r.bic << '\n';
    return out.str();
}

}  // namespace lcirt
