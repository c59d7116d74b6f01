#include "pulseforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "pulseforge/errors.hpp"
#include "pulseforge/rng.hpp"

namespace pulseforge {

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ValidationError("datasetpipe: unknown split tag " + name);
}

int ReductionMap::output_count() const {
    int n = 0;
    for (const auto& g : groups) n += g.is_output ? 1 : 0;
    return n;
}

std::vector<int> ReductionMap::output_groups() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(groups.size()); ++i)
        if (groups[i].is_output) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [this](int a, int b) {
        return *std::min_element(groups[a].columns.begin(), groups[a].columns.end()) <
               *std::min_element(groups[b].columns.begin(), groups[b].columns.end());
    });
    return idx;
}

void ReductionMap::validate() const {
    std::vector<int> seen(n_columns, 0);
    for (const auto& g : groups) {
        if (g.columns.empty()) throw ValidationError("datasetpipe: empty reduction group");
        for (int c : g.columns) {
            if (c < 0 || c >= n_columns) throw ValidationError("datasetpipe: group column out of range");
            ++seen[c];
        }
    }
    for (int c = 0; c < n_columns; ++c)
        if (seen[c] != 1)
            throw ValidationError("datasetpipe: reduction groups must partition the columns");
}

std::vector<Eigen::Index> AngleDataset::rows_with(Split s) const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(split.size()); ++i)
        if (split[i] == s) rows.push_back(i);
    return rows;
}

void AngleDataset::validate() const {
    if (angles.size() != coeffs.rows())
        throw ValidationError("datasetpipe: angle/coefficient row mismatch");
    for (Eigen::Index i = 1; i < angles.size(); ++i)
        if (!(angles[i] > angles[i - 1]))
            throw ValidationError("datasetpipe: angles must be strictly increasing");
    if (!split.empty() && static_cast<Eigen::Index>(split.size()) != angles.size())
        throw ValidationError("datasetpipe: split tags must cover every row");
}

AngleDataset average_over_seeds(const std::vector<RawRecord>& raw) {
    if (raw.empty()) throw ValidationError("datasetpipe: no records to average");

    std::map<double, std::vector<const RawRecord*>> by_angle;
    for (const auto& rec : raw) by_angle[rec.angle].push_back(&rec);

    // A hole is an angle with fewer seed records than its peers; that is the
    // signature of a partially written raw file.
    std::size_t k_max = 0;
    for (const auto& [angle, recs] : by_angle) k_max = std::max(k_max, recs.size());
    std::vector<int> holes;
    int angle_index = 0;
    for (const auto& [angle, recs] : by_angle) {
        if (recs.size() != k_max) holes.push_back(angle_index);
        ++angle_index;
    }
    if (!holes.empty()) {
        std::ostringstream msg;
        msg << "datasetpipe: incomplete seed coverage at angle indices";
        for (int h : holes) msg << ' ' << h;
        throw ValidationError(msg.str());
    }

    const Eigen::Index n_cols = raw.front().coeffs.size();
    AngleDataset ds;
    ds.angles.resize(static_cast<Eigen::Index>(by_angle.size()));
    ds.coeffs.resize(static_cast<Eigen::Index>(by_angle.size()), n_cols);
    Eigen::Index row = 0;
    for (const auto& [angle, recs] : by_angle) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_cols);
        for (const auto* rec : recs) {
            if (rec->coeffs.size() != n_cols)
                throw ValidationError("datasetpipe: inconsistent coefficient arity in raw data");
            acc += rec->coeffs;
        }
        ds.angles[row] = angle;
        ds.coeffs.row(row) = acc.transpose() / static_cast<double>(recs.size());
        ++row;
    }
    ds.validate();
    return ds;
}

AngleDataset smooth(const AngleDataset& ds, int window) {
    ds.validate();
    const Eigen::Index n = ds.n_angles();
    if (window < 1) throw ValidationError("datasetpipe: window must be >= 1");
    if (window > n)
        throw ValidationError("datasetpipe: window " + std::to_string(window) +
                              " exceeds dataset size " + std::to_string(n));
    AngleDataset out = ds;
    const Eigen::Index half = window / 2;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index h = std::min({half, i, n - 1 - i});
        out.coeffs.row(i) =
            ds.coeffs.middleRows(i - h, 2 * h + 1).colwise().mean();
    }
    return out;
}

Eigen::VectorXd total_variation(const AngleDataset& ds) {
    if (ds.n_angles() < 2) throw ValidationError("datasetpipe: total variation needs >= 2 angles");
    Eigen::VectorXd tv = Eigen::VectorXd::Zero(ds.n_out());
    for (Eigen::Index i = 0; i + 1 < ds.n_angles(); ++i)
        tv += (ds.coeffs.row(i + 1) - ds.coeffs.row(i)).cwiseAbs().transpose();
    return tv;
}

namespace {

struct Cluster {
    std::vector<int> columns;
    Eigen::VectorXd mean_traj;
};

// Greedy single-linkage on trajectories in column order: a column joins the
// first cluster whose running mean it tracks within the cutoff (sup norm).
std::vector<Cluster> cluster_trajectories(const Eigen::MatrixXd& coeffs,
                                          const std::vector<int>& cols, double cutoff) {
    std::vector<Cluster> clusters;
    for (int c : cols) {
        const Eigen::VectorXd traj = coeffs.col(c);
        bool placed = false;
        for (auto& cl : clusters) {
            if ((traj - cl.mean_traj).lpNorm<Eigen::Infinity>() <= cutoff) {
                const double k = static_cast<double>(cl.columns.size());
                cl.mean_traj = (cl.mean_traj * k + traj) / (k + 1.0);
                cl.columns.push_back(c);
                placed = true;
                break;
            }
        }
        if (!placed) clusters.push_back(Cluster{{c}, traj});
    }
    return clusters;
}

ReducedDataset apply_reduction(const AngleDataset& ds, ReductionMap map) {
    map.validate();
    const auto outputs = map.output_groups();
    ReducedDataset out;
    out.map = map;
    out.ds.angles = ds.angles;
    out.ds.split = ds.split;
    out.ds.coeffs.resize(ds.n_angles(), static_cast<Eigen::Index>(outputs.size()));
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        const auto& g = map.groups[outputs[k]];
        Eigen::VectorXd col = Eigen::VectorXd::Zero(ds.n_angles());
        for (int c : g.columns) col += ds.coeffs.col(c);
        out.ds.coeffs.col(static_cast<Eigen::Index>(k)) = col / double(g.columns.size());
    }
    out.ds.reduction = map;
    return out;
}

}  // namespace

ReducedDataset reduce_coefficients(const AngleDataset& ds, double variation_threshold,
                                   int target_outputs) {
    ds.validate();
    if (!(variation_threshold > 0.0))
        throw ValidationError("datasetpipe: variation threshold must be positive");

    const Eigen::Index n_cols = ds.n_out();
    const double scale = ds.coeffs.maxCoeff() - ds.coeffs.minCoeff();
    const double cutoff = variation_threshold * std::max(scale, 1e-300);

    std::vector<int> constant_cols, varying_cols;
    for (Eigen::Index c = 0; c < n_cols; ++c) {
        const double var = ds.coeffs.col(c).maxCoeff() - ds.coeffs.col(c).minCoeff();
        (var < cutoff ? constant_cols : varying_cols).push_back(static_cast<int>(c));
    }

    ReductionMap map;
    map.n_columns = static_cast<int>(n_cols);

    // Constant columns cluster by mean value and freeze; one stored scalar
    // per group reconstructs every member.
    if (!constant_cols.empty()) {
        std::vector<std::pair<double, int>> means;
        for (int c : constant_cols) means.emplace_back(ds.coeffs.col(c).mean(), c);
        std::sort(means.begin(), means.end());
        ReductionGroup group;
        double group_sum = 0.0;
        double prev = means.front().first;
        auto flush = [&] {
            if (group.columns.empty()) return;
            group.mean = group_sum / group.columns.size();
            group.is_output = false;
            map.groups.push_back(group);
            group = ReductionGroup{};
            group_sum = 0.0;
        };
        for (const auto& [mean, col] : means) {
            if (!group.columns.empty() && mean - prev > cutoff) flush();
            group.columns.push_back(col);
            group_sum += mean;
            prev = mean;
        }
        flush();
    }

    // Varying columns with matching trajectories share one output.
    for (const auto& cl : cluster_trajectories(ds.coeffs, varying_cols, cutoff)) {
        ReductionGroup group;
        group.columns = cl.columns;
        group.mean = cl.mean_traj.mean();
        group.is_output = true;
        map.groups.push_back(group);
    }

    const int achievable = map.output_count();
    if (achievable != target_outputs) {
        std::ostringstream msg;
        msg << "datasetpipe: threshold " << variation_threshold << " yields " << achievable
            << " outputs (" << map.groups.size() << " groups), target is " << target_outputs;
        throw ReductionError(msg.str(), achievable);
    }
    return apply_reduction(ds, std::move(map));
}

ReducedDataset reduce_to_target(const AngleDataset& ds, int target_outputs) {
    int closest = -1;
    for (double threshold = 1e-4; threshold <= 0.7; threshold *= 1.15) {
        try {
            return reduce_coefficients(ds, threshold, target_outputs);
        } catch (const ReductionError& e) {
            if (closest < 0 || std::abs(e.achievable - target_outputs) <
                                   std::abs(closest - target_outputs))
                closest = e.achievable;
        }
    }
    throw ReductionError("datasetpipe: no threshold in [1e-4, 0.7] reaches " +
                             std::to_string(target_outputs) + " outputs",
                         closest);
}

Eigen::VectorXd expand_coefficients(const Eigen::VectorXd& reduced, const ReductionMap& map) {
    map.validate();
    const auto outputs = map.output_groups();
    if (reduced.size() != static_cast<Eigen::Index>(outputs.size()))
        throw ValidationError("datasetpipe: reduced vector arity " + std::to_string(reduced.size()) +
                              " does not match map outputs " + std::to_string(outputs.size()));
    Eigen::VectorXd full = Eigen::VectorXd::Zero(map.n_columns);
    std::vector<char> is_out_group(map.groups.size(), 0);
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        is_out_group[outputs[k]] = 1;
        for (int c : map.groups[outputs[k]].columns) full[c] = reduced[static_cast<Eigen::Index>(k)];
    }
    for (std::size_t g = 0; g < map.groups.size(); ++g) {
        if (is_out_group[g]) continue;
        for (int c : map.groups[g].columns) full[c] = map.groups[g].mean;
    }
    return full;
}

AngleDataset split_dataset(const AngleDataset& ds, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed) {
    ds.validate();
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ValidationError("datasetpipe: split fractions must sum to 1");
    if (train_frac < 0 || val_frac < 0 || test_frac < 0)
        throw ValidationError("datasetpipe: split fractions must be non-negative");
    const Eigen::Index n = ds.n_angles();
    if (n == 0) throw ValidationError("datasetpipe: cannot split an empty dataset");

    const auto n_train = static_cast<Eigen::Index>(std::llround(train_frac * n));
    const auto n_trainval = static_cast<Eigen::Index>(std::llround((train_frac + val_frac) * n));

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(seed).split(0x5117);
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);

    AngleDataset out = ds;
    out.split.assign(n, Split::train);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.split[order[i]] = i < n_train ? Split::train
                              : i < n_trainval ? Split::val
                                               : Split::test;
    }

    auto check = [&](Split s, double frac) {
        if (frac > 0.0 && out.rows_with(s).empty())
            throw ValidationError("datasetpipe: split produced an empty " + split_name(s) +
                                  " set; use more angles or a larger fraction");
    };
    check(Split::train, train_frac);
    check(Split::val, val_frac);
    check(Split::test, test_frac);
    return out;
}

}  // namespace pulseforge
