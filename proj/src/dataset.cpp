#include "addt/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "addt/errors.hpp"
#include "addt/numeric.hpp"

namespace addt {

using nlohmann::json;

void DistillDataset::validate() const {
    if (samples.empty()) throw ValidationError("dataset: empty");
    const std::size_t d = samples[0].x.size();
    const std::size_t a = samples[0].target.size();
    if (d == 0) throw ValidationError("dataset: zero-dimensional features");
    if (a == 0) throw ValidationError("dataset: empty target distribution");
    if (scaling.means.size() != d || scaling.stds.size() != d)
        throw ValidationError("dataset: scaling length does not match feature dimension");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.x.size() != d)
            throw ValidationError("dataset: sample " + std::to_string(i) + " has inconsistent feature length");
        if (s.target.size() != a)
            throw ValidationError("dataset: sample " + std::to_string(i) + " has inconsistent target length");
        if (!all_finite(s.x) || !all_finite(s.target))
            throw ValidationError("dataset: sample " + std::to_string(i) + " contains non-finite values");
        double sum = 0.0;
        for (double t : s.target) {
            if (t < 0.0)
                throw ValidationError("dataset: sample " + std::to_string(i) + " has a negative target probability");
            sum += t;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("dataset: sample " + std::to_string(i) + " target sums to " + std::to_string(sum));
    }
    if (!feature_names.empty() && feature_names.size() != d)
        throw ValidationError("dataset: feature_names length mismatch");
    if (!action_names.empty() && action_names.size() != a)
        throw ValidationError("dataset: action_names length mismatch");
}

FeatureScaling compute_scaling(const std::vector<std::vector<double>>& raw_rows) {
    if (raw_rows.empty()) throw ValidationError("compute_scaling: no rows");
    const std::size_t d = raw_rows[0].size();
    FeatureScaling sc;
    sc.means.assign(d, 0.0);
    sc.stds.assign(d, 0.0);
    const double n = static_cast<double>(raw_rows.size());
    for (const auto& row : raw_rows) {
        if (row.size() != d) throw ValidationError("compute_scaling: ragged rows");
        for (std::size_t j = 0; j < d; ++j) sc.means[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) sc.means[j] /= n;
    for (const auto& row : raw_rows)
        for (std::size_t j = 0; j < d; ++j) {
            const double dlt = row[j] - sc.means[j];
            sc.stds[j] += dlt * dlt;
        }
    for (std::size_t j = 0; j < d; ++j) {
        sc.stds[j] = std::sqrt(sc.stds[j] / n);
        if (sc.stds[j] < 1e-12) sc.stds[j] = 1.0;  // constant feature: keep invertible
    }
    return sc;
}

void save_dataset(const DistillDataset& data, const std::string& path) {
    data.validate();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open dataset file for writing: " + path);

    json header;
    header["kind"] = "header";
    header["feature_names"] = data.feature_names;
    header["action_names"] = data.action_names;
    header["scaling"] = {{"means", data.scaling.means}, {"stds", data.scaling.stds}};
    header["meta"] = {{"tau", data.meta.tau},
                      {"seed", data.meta.seed},
                      {"env_config_hash", data.meta.env_config_hash},
                      {"start_day", data.meta.start_day},
                      {"days", data.meta.days}};
    out << header.dump() << '\n';

    for (const auto& s : data.samples) {
        json rec;
        rec["x"] = data.scaling.unstandardize(s.x);
        rec["target"] = s.target;
        out << rec.dump() << '\n';
    }
    if (!out) throw ConfigError("write failed for dataset file: " + path);
}

DistillDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);

    DistillDataset data;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("dataset " + path + " line " + std::to_string(lineno) +
                                  ": " + e.what());
        }
        if (!have_header) {
            if (!rec.is_object() || rec.value("kind", "") != "header")
                throw ValidationError("dataset " + path + ": first record must be the header");
            try {
                data.feature_names = rec.value("feature_names", std::vector<std::string>{});
                data.action_names = rec.value("action_names", std::vector<std::string>{});
                data.scaling.means = rec.at("scaling").at("means").get<std::vector<double>>();
                data.scaling.stds = rec.at("scaling").at("stds").get<std::vector<double>>();
                if (rec.contains("meta")) {
                    const auto& m = rec["meta"];
                    data.meta.tau = m.value("tau", 1.0);
                    data.meta.seed = m.value("seed", std::uint64_t{0});
                    data.meta.env_config_hash = m.value("env_config_hash", std::string{});
                    data.meta.start_day = m.value("start_day", 0L);
                    data.meta.days = m.value("days", 0L);
                }
            } catch (const json::exception& e) {
                throw ValidationError("dataset " + path + " header: " + e.what());
            }
            if (data.scaling.means.size() != data.scaling.stds.size())
                throw ValidationError("dataset " + path + " header: scaling length mismatch");
            have_header = true;
            continue;
        }
        DistillSample s;
        try {
            std::vector<double> raw = rec.at("x").get<std::vector<double>>();
            s.target = rec.at("target").get<std::vector<double>>();
            if (raw.size() != data.scaling.means.size())
                throw ValidationError("dataset " + path + " line " + std::to_string(lineno) +
                                      ": feature length mismatch");
            s.x = data.scaling.standardize(raw);
        } catch (const json::exception& e) {
            throw ValidationError("dataset " + path + " line " + std::to_string(lineno) +
                                  ": " + e.what());
        }
        data.samples.push_back(std::move(s));
    }
    if (!have_header) throw ValidationError("dataset " + path + ": missing header record");
    data.validate();
    return data;
}

}  // namespace addt
