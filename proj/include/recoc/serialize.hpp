#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "recoc/binary_learner.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/ensemble.hpp"
#include "recoc/errors.hpp"

// JSON encodings for every persistent artifact. Doubles survive round trips
// exactly (shortest-representation printing on write, exact binary64 parse
// on read); tests pin that property.
namespace recoc::ser {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("matrix: expected array of rows");
    Matrix m;
    for (const auto& row : j) {
        std::vector<double> r;
        r.reserve(row.size());
        for (const auto& v : row) r.push_back(v.get<double>());
        m.append_row(r);
    }
    return m;
}

// ---- CodeMatrix: {seed, n_classes, code_length, rows} ----------------------

inline json code_to_json(const CodeMatrix& c) {
    json rows = json::array();
    for (int i = 0; i < c.n_classes; ++i) {
        json row = json::array();
        for (int j = 0; j < c.code_length; ++j) row.push_back(c.at(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"seed", c.seed},
                {"n_classes", c.n_classes},
                {"code_length", c.code_length},
                {"rows", std::move(rows)}};
}

inline CodeMatrix code_from_json(const json& j) {
    CodeMatrix c;
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.n_classes = j.at("n_classes").get<int>();
        c.code_length = j.at("code_length").get<int>();
        const auto& rows = j.at("rows");
        if (static_cast<int>(rows.size()) != c.n_classes)
            throw FormatError("code matrix: row count mismatch");
        c.entries.reserve(static_cast<std::size_t>(c.n_classes) * c.code_length);
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c.code_length)
                throw FormatError("code matrix: row length mismatch");
            for (const auto& v : row) {
                const int e = v.get<int>();
                if (e != 1 && e != -1) throw FormatError("code matrix: entries must be +1/-1");
                c.entries.push_back(e);
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("code matrix: ") + e.what());
    }
    return c;
}

// ---- TrainConfig -----------------------------------------------------------

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"hidden_width", c.hidden_width},
                {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    try {
        c.learning_rate = j.at("learning_rate").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.hidden_width = j.at("hidden_width").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    return c;
}

// ---- BinaryClassifier --------------------------------------------------------

inline json classifier_to_json(const BinaryClassifier& f) {
    json j{{"kind", to_string(f.kind)}, {"input_dim", f.input_dim}};
    if (f.kind == BinaryKind::LogisticLinear) {
        j["w"] = f.w;
        j["b"] = f.b;
    } else {
        j["w1"] = matrix_to_json(f.w1);
        j["b1"] = f.b1;
        j["w2"] = f.w2;
        j["b2"] = f.b2;
    }
    return j;
}

inline BinaryClassifier classifier_from_json(const json& j) {
    BinaryClassifier f;
    try {
        f.kind = binary_kind_from_string(j.at("kind").get<std::string>());
        f.input_dim = j.at("input_dim").get<std::size_t>();
        if (f.kind == BinaryKind::LogisticLinear) {
            f.w = j.at("w").get<std::vector<double>>();
            f.b = j.at("b").get<double>();
        } else {
            f.w1 = matrix_from_json(j.at("w1"));
            f.b1 = j.at("b1").get<std::vector<double>>();
            f.w2 = j.at("w2").get<std::vector<double>>();
            f.b2 = j.at("b2").get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("classifier: ") + e.what());
    }
    return f;
}

// ---- SubstituteModel ---------------------------------------------------------

inline json substitute_to_json(const SubstituteModel& m) {
    json j{{"arch", to_string(m.arch)},
           {"n_classes", m.n_classes},
           {"input_dim", m.input_dim}};
    if (m.arch == SubstituteArch::LinearSoftmax) {
        j["w"] = matrix_to_json(m.w);
        j["b"] = m.b;
    } else {
        j["w1"] = matrix_to_json(m.w1);
        j["b1"] = m.b1;
        j["w2"] = matrix_to_json(m.w2);
        j["b2"] = m.b2;
    }
    return j;
}

inline SubstituteModel substitute_from_json(const json& j) {
    SubstituteModel m;
    try {
        m.arch = substitute_arch_from_string(j.at("arch").get<std::string>());
        m.n_classes = j.at("n_classes").get<int>();
        m.input_dim = j.at("input_dim").get<std::size_t>();
        if (m.arch == SubstituteArch::LinearSoftmax) {
            m.w = matrix_from_json(j.at("w"));
            m.b = j.at("b").get<std::vector<double>>();
        } else {
            m.w1 = matrix_from_json(j.at("w1"));
            m.b1 = j.at("b1").get<std::vector<double>>();
            m.w2 = matrix_from_json(j.at("w2"));
            m.b2 = j.at("b2").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("substitute model: ") + e.what());
    }
    return m;
}

// ---- RelabelMap ---------------------------------------------------------------

inline json relabel_map_to_json(const RelabelMap& m) { return json{{"signs", m.signs}}; }

inline RelabelMap relabel_map_from_json(const json& j) {
    RelabelMap m;
    try {
        m.signs = j.at("signs").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("relabel map: ") + e.what());
    }
    m.validate();
    return m;
}

// ---- Ensemble ------------------------------------------------------------------

inline json ensemble_to_json(const Ensemble& e) {
    json classifiers = json::array();
    for (const auto& f : e.classifiers) classifiers.push_back(classifier_to_json(f));
    return json{{"code", code_to_json(e.code)},
                {"classifiers", std::move(classifiers)},
                {"r", e.r},
                {"kind", to_string(e.kind)},
                {"train_config", train_config_to_json(e.train_config)}};
}

inline Ensemble ensemble_from_json(const json& j) {
    Ensemble e;
    try {
        e.code = code_from_json(j.at("code"));
        e.r = j.at("r").get<double>();
        e.kind = binary_kind_from_string(j.at("kind").get<std::string>());
        e.train_config = train_config_from_json(j.at("train_config"));
        for (const auto& f : j.at("classifiers")) e.classifiers.push_back(classifier_from_json(f));
    } catch (const json::exception& ex) {
        throw FormatError(std::string("ensemble: ") + ex.what());
    }
    if (static_cast<int>(e.classifiers.size()) != e.code.code_length)
        throw FormatError("ensemble: classifier count != code_length");
    return e;
}

// ---- File helpers ----------------------------------------------------------------

inline void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_json: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("save_json: write failed for " + path);
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_json: cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("load_json: " + path + ": " + e.what());
    }
}

}  // namespace recoc::ser
