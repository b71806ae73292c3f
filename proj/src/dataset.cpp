#include "amip/dataset.hpp"
#include "amip/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace amip {

Dataset::Dataset(std::vector<std::string> names, std::vector<Column> columns,
                 std::vector<std::size_t> row_ids)
    : names_(std::move(names)), columns_(std::move(columns)), row_ids_(std::move(row_ids)) {
    if (names_.size() != columns_.size()) throw SchemaError("column names and columns differ in count");
    if (columns_.empty()) throw SchemaError("dataset has no columns");
    const std::size_t n = columns_.front().values.size();
    if (n == 0) throw SchemaError("dataset has no rows");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].values.size() != n)
            throw SchemaError("column '" + names_[j] + "' has a different length");
        for (double v : columns_[j].values) {
            if (!std::isfinite(v)) throw SchemaError("column '" + names_[j] + "' contains a non-finite value");
        }
    }
    if (row_ids_.empty()) {
        row_ids_.resize(n);
        std::iota(row_ids_.begin(), row_ids_.end(), std::size_t{1});
    } else if (row_ids_.size() != n) {
        throw SchemaError("row id count does not match column length");
    }
}

Dataset Dataset::from_numeric(
    const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
    std::vector<std::string> names;
    std::vector<Column> cols;
    for (const auto& [name, values] : columns) {
        names.push_back(name);
        cols.push_back(Column{values, {}});
    }
    return Dataset(std::move(names), std::move(cols));
}

bool Dataset::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Column& Dataset::column(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw SchemaError("column '" + name + "' not found");
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

Eigen::Index RegressionProblem::index_of(const std::string& regressor) const {
    auto it = std::find(regressor_names.begin(), regressor_names.end(), regressor);
    if (it == regressor_names.end()) throw BoundsError("no regressor named '" + regressor + "'");
    return static_cast<Eigen::Index>(it - regressor_names.begin());
}

bool has_full_column_rank(const Eigen::MatrixXd& m, double tolerance) {
    if (m.cols() == 0) return true;
    if (m.rows() < m.cols()) return false;
    Eigen::VectorXd sv;
    if (m.rows() > 2 * m.cols()) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        Eigen::MatrixXd r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
    } else {
        sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    }
    const double largest = sv(0);
    if (!(largest > 0.0)) return false;
    return sv(sv.size() - 1) / largest > tolerance;
}

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

RegressionProblem make_problem(ProblemData d) {
    const Eigen::Index n = d.y.size();
    const Eigen::Index p = d.x.cols();
    if (d.x.rows() != n) throw SchemaError("regressor matrix row count does not match outcome length");
    if (p == 0) throw SchemaError("model has no regressors");
    if (n <= p)
        throw InsufficientDataError("need more observations than parameters (N=" + std::to_string(n) +
                                    ", P=" + std::to_string(p) + ")");
    if (!d.y.allFinite() || !all_finite(d.x)) throw SchemaError("outcome or regressors contain non-finite values");
    if (d.z) {
        if (d.z->rows() != n || d.z->cols() != p)
            throw SchemaError("instrument matrix must be N x P with the same column count as the regressors");
        if (!all_finite(*d.z)) throw SchemaError("instruments contain non-finite values");
    }
    if (d.base_weights) {
        if (d.base_weights->size() != n) throw SchemaError("weight vector length does not match N");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = (*d.base_weights)(i);
            if (!std::isfinite(v) || !(v > 0.0)) throw SchemaError("base weights must be strictly positive");
        }
    }
    if (d.clusters && static_cast<Eigen::Index>(d.clusters->size()) != n)
        throw SchemaError("cluster label count does not match N");

    if (!has_full_column_rank(d.x)) throw DegenerateDesignError("regressor matrix is rank deficient");
    if (d.z) {
        if (!has_full_column_rank(*d.z)) throw DegenerateDesignError("instrument matrix is rank deficient");
        Eigen::MatrixXd cross = d.z->transpose() * d.x;
        if (!has_full_column_rank(cross))
            throw DegenerateDesignError("instrument cross-product Z'X is singular");
    }

    if (d.regressor_names.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) d.regressor_names.push_back("x" + std::to_string(j));
    } else if (static_cast<Eigen::Index>(d.regressor_names.size()) != p) {
        throw SchemaError("regressor name count does not match P");
    }
    if (d.row_ids.empty()) {
        d.row_ids.resize(static_cast<std::size_t>(n));
        std::iota(d.row_ids.begin(), d.row_ids.end(), std::size_t{1});
    } else if (static_cast<Eigen::Index>(d.row_ids.size()) != n) {
        throw SchemaError("row id count does not match N");
    }

    RegressionProblem prob;
    prob.y = std::move(d.y);
    prob.x = std::move(d.x);
    prob.z = std::move(d.z);
    prob.base_weights = std::move(d.base_weights);
    prob.clusters = std::move(d.clusters);
    prob.regressor_names = std::move(d.regressor_names);
    prob.row_ids = std::move(d.row_ids);
    return prob;
}

namespace {

struct ExpandedColumn {
    std::string name;
    std::vector<double> values;
};

// Numeric columns pass through; categorical columns become 0/1 dummies for
// every level but the first.
std::vector<ExpandedColumn> expand(const Dataset& data, const std::string& name) {
    const Column& col = data.column(name);
    if (!col.is_categorical()) return {{name, col.values}};
    std::vector<ExpandedColumn> out;
    for (std::size_t level = 1; level < col.levels.size(); ++level) {
        ExpandedColumn e{name + "[" + col.levels[level] + "]", {}};
        e.values.reserve(col.values.size());
        for (double code : col.values) e.values.push_back(code == static_cast<double>(level) ? 1.0 : 0.0);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

RegressionProblem build_problem(const Dataset& data, const ModelSpec& spec) {
    const auto n = static_cast<Eigen::Index>(data.n_rows());

    const Column& outcome = data.column(spec.outcome);
    if (outcome.is_categorical()) throw SchemaError("outcome column '" + spec.outcome + "' must be numeric");

    if (spec.endogenous.size() != spec.instruments.size())
        throw SchemaError("each endogenous regressor needs exactly one excluded instrument");
    for (const auto& e : spec.endogenous) {
        if (std::find(spec.regressors.begin(), spec.regressors.end(), e) == spec.regressors.end())
            throw SchemaError("endogenous variable '" + e + "' is not among the regressors");
    }

    std::vector<ExpandedColumn> x_cols;
    std::vector<ExpandedColumn> z_cols;
    const bool iv = !spec.instruments.empty();
    if (spec.intercept) {
        x_cols.push_back({"(Intercept)", std::vector<double>(static_cast<std::size_t>(n), 1.0)});
        if (iv) z_cols.push_back(x_cols.back());
    }
    for (const auto& r : spec.regressors) {
        auto ex = expand(data, r);
        x_cols.insert(x_cols.end(), ex.begin(), ex.end());
        if (!iv) continue;
        auto it = std::find(spec.endogenous.begin(), spec.endogenous.end(), r);
        if (it == spec.endogenous.end()) {
            z_cols.insert(z_cols.end(), ex.begin(), ex.end());
        } else {
            auto inst = expand(data, spec.instruments[static_cast<std::size_t>(it - spec.endogenous.begin())]);
            if (inst.size() != ex.size())
                throw SchemaError("instrument for '" + r + "' expands to a different number of columns");
            z_cols.insert(z_cols.end(), inst.begin(), inst.end());
        }
    }

    ProblemData d;
    d.y = Eigen::Map<const Eigen::VectorXd>(outcome.values.data(), n);
    d.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
        d.x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(x_cols[j].values.data(), n);
        d.regressor_names.push_back(x_cols[j].name);
    }
    if (iv) {
        Eigen::MatrixXd z(n, static_cast<Eigen::Index>(z_cols.size()));
        for (std::size_t j = 0; j < z_cols.size(); ++j)
            z.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(z_cols[j].values.data(), n);
        d.z = std::move(z);
    }
    if (spec.weights) {
        const Column& w = data.column(*spec.weights);
        if (w.is_categorical()) throw SchemaError("weights column '" + *spec.weights + "' must be numeric");
        d.base_weights = Eigen::Map<const Eigen::VectorXd>(w.values.data(), n);
    }
    if (spec.clusters) {
        const Column& c = data.column(*spec.clusters);
        std::map<double, int> ids;
        std::vector<int> labels;
        labels.reserve(c.values.size());
        for (double v : c.values) {
            auto [it, inserted] = ids.emplace(v, static_cast<int>(ids.size()));
            labels.push_back(it->second);
        }
        d.clusters = std::move(labels);
    }
    d.row_ids.assign(data.row_ids().begin(), data.row_ids().end());
    return make_problem(std::move(d));
}

}  // namespace amip
