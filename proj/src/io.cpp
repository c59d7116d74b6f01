#include "pulseforge/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pulseforge/errors.hpp"

namespace pulseforge {

using nlohmann::json;

std::string format_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ValidationError("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("io: cannot parse number '" + s + "'");
    }
}

std::ofstream open_out(const std::string& path, bool append = false) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw ValidationError("io: cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("io: cannot open " + path);
    return in;
}

json load_json(const std::string& path) {
    auto in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("io: bad JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace

void save_coefficients_csv(const std::string& path,
                           const std::vector<PulseCoefficients>& rows) {
    auto out = open_out(path);
    for (const auto& row : rows) {
        const Eigen::VectorXd c = row.stacked();
        for (Eigen::Index i = 0; i < c.size(); ++i)
            out << (i ? "," : "") << format_g17(c[i]);
        out << '\n';
    }
}

std::vector<PulseCoefficients> load_coefficients_csv(const std::string& path) {
    auto in = open_in(path);
    std::vector<PulseCoefficients> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        Eigen::VectorXd c(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) c[i] = parse_double(fields[i]);
        rows.push_back(PulseCoefficients::from_stacked(c));
    }
    return rows;
}

static const char* kRawHeader = "angle,seed,c0,c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12,c13,c14,c15,c16,c17,c18,c19,fidelity,converged";

void append_raw_records(const std::string& path, const std::vector<RawRecord>& records,
                        bool write_header) {
    auto out = open_out(path, !write_header);
    if (write_header) out << kRawHeader << '\n';
    for (const auto& rec : records) {
        out << format_g17(rec.angle) << ',' << rec.seed;
        for (Eigen::Index i = 0; i < rec.coeffs.size(); ++i) out << ',' << format_g17(rec.coeffs[i]);
        out << ',' << format_g17(rec.fidelity) << ',' << (rec.converged ? 1 : 0) << '\n';
    }
    out.flush();
    if (!out) throw ValidationError("io: write failed for " + path);
}

std::vector<RawRecord> load_raw_records(const std::string& path) {
    auto in = open_in(path);
    std::vector<RawRecord> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("angle,", 0) == 0) continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() < 5) throw ValidationError("io: short raw record in " + path);
        RawRecord rec;
        rec.angle = parse_double(fields[0]);
        rec.seed = std::stoull(fields[1]);
        const std::size_t n_coeff = fields.size() - 4;
        rec.coeffs.resize(static_cast<Eigen::Index>(n_coeff));
        for (std::size_t i = 0; i < n_coeff; ++i)
            rec.coeffs[static_cast<Eigen::Index>(i)] = parse_double(fields[2 + i]);
        rec.fidelity = parse_double(fields[fields.size() - 2]);
        rec.converged = fields.back() == "1";
        records.push_back(std::move(rec));
    }
    return records;
}

void save_dataset_csv(const std::string& path, const AngleDataset& ds) {
    ds.validate();
    auto out = open_out(path);
    out << "angle";
    for (Eigen::Index c = 0; c < ds.n_out(); ++c) out << ",c" << c;
    if (!ds.split.empty()) out << ",split";
    out << '\n';
    for (Eigen::Index i = 0; i < ds.n_angles(); ++i) {
        out << format_g17(ds.angles[i]);
        for (Eigen::Index c = 0; c < ds.n_out(); ++c) out << ',' << format_g17(ds.coeffs(i, c));
        if (!ds.split.empty()) out << ',' << split_name(ds.split[i]);
        out << '\n';
    }
}

AngleDataset load_dataset_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("io: empty dataset file " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "angle")
        throw ValidationError("io: dataset header must start with 'angle' in " + path);
    const bool has_split = header.back() == "split";
    const Eigen::Index n_cols = static_cast<Eigen::Index>(header.size()) - 1 - (has_split ? 1 : 0);

    std::vector<double> angles;
    std::vector<double> values;
    std::vector<Split> tags;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<Eigen::Index>(fields.size()) != n_cols + 1 + (has_split ? 1 : 0))
            throw ValidationError("io: ragged dataset row in " + path);
        angles.push_back(parse_double(fields[0]));
        for (Eigen::Index c = 0; c < n_cols; ++c) values.push_back(parse_double(fields[1 + c]));
        if (has_split) tags.push_back(split_from_name(fields.back()));
    }

    AngleDataset ds;
    ds.angles = Eigen::Map<Eigen::VectorXd>(angles.data(), static_cast<Eigen::Index>(angles.size()));
    ds.coeffs.resize(ds.angles.size(), n_cols);
    for (Eigen::Index i = 0; i < ds.angles.size(); ++i)
        for (Eigen::Index c = 0; c < n_cols; ++c) ds.coeffs(i, c) = values[i * n_cols + c];
    ds.split = tags;
    ds.validate();
    return ds;
}

void save_reduction_map(const std::string& path, const ReductionMap& map) {
    map.validate();
    json groups = json::array();
    for (const auto& g : map.groups)
        groups.push_back({{"columns", g.columns}, {"mean", g.mean}, {"output", g.is_output}});
    const json j = {{"n_columns", map.n_columns}, {"groups", groups}};
    open_out(path) << j.dump(2) << '\n';
}

ReductionMap load_reduction_map(const std::string& path) {
    const json j = load_json(path);
    ReductionMap map;
    try {
        map.n_columns = j.at("n_columns").get<int>();
        for (const auto& g : j.at("groups")) {
            ReductionGroup group;
            group.columns = g.at("columns").get<std::vector<int>>();
            group.mean = g.at("mean").get<double>();
            group.is_output = g.at("output").get<bool>();
            map.groups.push_back(std::move(group));
        }
    } catch (const json::exception& e) {
        throw ValidationError("io: bad reduction map " + path + ": " + e.what());
    }
    map.validate();
    return map;
}

void save_model(const std::string& path, const MlpModel& model) {
    model.validate();
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        json w = json::array();
        for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c)
                w.push_back(model.weights[l](r, c));
        weights.push_back(w);
        json b = json::array();
        for (Eigen::Index r = 0; r < model.biases[l].size(); ++r)
            b.push_back(model.biases[l][r]);
        biases.push_back(b);
    }
    json j = {{"layer_sizes", model.layer_sizes},
              {"weights", weights},
              {"biases", biases},
              {"activation",
               {{"hidden", "leaky_relu"}, {"alpha", model.hidden_alpha}, {"output", "linear"}}}};
    if (model.quant) {
        j["quant"] = {{"total_bits", model.quant->total_bits},
                      {"integer_bits", model.quant->integer_bits},
                      {"alpha_neg", model.quant->alpha_neg},
                      {"qnoise_factor", model.quant->qnoise_factor}};
    }
    open_out(path) << j.dump(2) << '\n';
}

MlpModel load_model(const std::string& path) {
    const json j = load_json(path);
    MlpModel model;
    try {
        model.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        model.hidden_alpha = j.at("activation").at("alpha").get<double>();
        const auto& weights = j.at("weights");
        const auto& biases = j.at("biases");
        for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
            const int rows = model.layer_sizes[l + 1], cols = model.layer_sizes[l];
            Eigen::MatrixXd w(rows, cols);
            const auto& wl = weights.at(l);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) w(r, c) = wl.at(r * cols + c).get<double>();
            model.weights.push_back(std::move(w));
            Eigen::VectorXd b(rows);
            for (int r = 0; r < rows; ++r) b[r] = biases.at(l).at(r).get<double>();
            model.biases.push_back(std::move(b));
        }
        if (j.contains("quant")) {
            FixedPointFormat fmt;
            fmt.total_bits = j["quant"].at("total_bits").get<int>();
            fmt.integer_bits = j["quant"].at("integer_bits").get<int>();
            fmt.alpha_neg = j["quant"].at("alpha_neg").get<double>();
            fmt.qnoise_factor = j["quant"].at("qnoise_factor").get<double>();
            model.quant = fmt;
        }
    } catch (const json::exception& e) {
        throw ValidationError("io: bad model file " + path + ": " + e.what());
    }
    model.validate();
    return model;
}

void save_unitary(const std::string& path, const GateUnitary& u) {
    json entries = json::array();
    for (Eigen::Index r = 0; r < u.u.rows(); ++r)
        for (Eigen::Index c = 0; c < u.u.cols(); ++c)
            entries.push_back({u.u(r, c).real(), u.u(r, c).imag()});
    const json j = {{"dim", u.dim()}, {"entries", entries}};
    open_out(path) << j.dump(2) << '\n';
}

GateUnitary load_unitary(const std::string& path) {
    const json j = load_json(path);
    try {
        const int d = j.at("dim").get<int>();
        const auto& entries = j.at("entries");
        if (static_cast<int>(entries.size()) != d * d)
            throw ValidationError("io: unitary entry count mismatch in " + path);
        Eigen::MatrixXcd u(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                const auto& e = entries.at(r * d + c);
                u(r, c) = std::complex<double>(e.at(0).get<double>(), e.at(1).get<double>());
            }
        return GateUnitary{u};
    } catch (const json::exception& e) {
        throw ValidationError("io: bad unitary file " + path + ": " + e.what());
    }
}

void save_loss_csv(const std::string& path, const std::vector<double>& train,
                   const std::vector<double>& val) {
    auto out = open_out(path);
    out << (val.empty() ? "epoch,train_loss" : "epoch,train_loss,val_loss") << '\n';
    for (std::size_t e = 0; e < train.size(); ++e) {
        out << e << ',' << format_g17(train[e]);
        if (!val.empty()) out << ',' << format_g17(e < val.size() ? val[e] : val.back());
        out << '\n';
    }
}

void save_arb_lengths_csv(const std::string& path, const ArbResult& result) {
    auto out = open_out(path);
    out << "m,avg_p,se\n";
    for (const auto& stat : result.per_length)
        out << stat.m << ',' << format_g17(stat.avg_p) << ',' << format_g17(stat.se) << '\n';
}

void save_arb_fit_json(const std::string& path, const ArbResult& result, const ArbConfig& cfg) {
    json cov = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(result.fit.covariance(r, c));
        cov.push_back(row);
    }
    const json j = {
        {"A", result.fit.a},
        {"B", result.fit.b},
        {"f", result.fit.f},
        {"covariance", cov},
        {"ci", {result.f_ci.first, result.f_ci.second}},
        {"dof", result.dof},
        {"t_crit", result.t_crit},
        {"alpha", cfg.alpha_level},
        {"chi2", result.fit.chi2},
        {"converged", result.fit.converged},
        {"K", cfg.sequences_per_length},
        {"N", cfg.shots_per_sequence},
        {"se_convention",
         cfg.se_convention == SeConvention::standard ? "standard" : "paper-literal"},
    };
    open_out(path) << j.dump(2) << '\n';
}

void save_arb_curve_csv(const std::string& path, const ArbResult& result) {
    auto out = open_out(path);
    out << "m,fitted_p\n";
    if (result.per_length.empty()) return;
    const int m_max = result.per_length.back().m;
    for (int m = result.per_length.front().m; m <= m_max; ++m) {
        const double p = result.fit.a + result.fit.b * std::pow(result.fit.f, m);
        out << m << ',' << format_g17(p) << '\n';
    }
}

std::string read_text_file(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pulseforge
