#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace amip {

// A single data column. Numeric columns hold reals; categorical columns hold
// level codes (indices into `levels`, stored as doubles) with the level labels
// kept in sorted order.
struct Column {
    std::vector<double> values;
    std::vector<std::string> levels;

    bool is_categorical() const noexcept { return !levels.empty(); }
};

class Dataset {
public:
    Dataset() = default;

    // All columns must share one length >= 1; `row_ids` defaults to 1..n.
    Dataset(std::vector<std::string> names, std::vector<Column> columns,
            std::vector<std::size_t> row_ids = {});

    // Convenience for numeric-only data held in memory.
    static Dataset from_numeric(
        const std::vector<std::pair<std::string, std::vector<double>>>& columns);

    std::size_t n_rows() const noexcept { return row_ids_.size(); }
    std::size_t n_columns() const noexcept { return columns_.size(); }

    bool has_column(const std::string& name) const;
    // Throws SchemaError naming the column when absent.
    const Column& column(const std::string& name) const;
    const std::vector<std::string>& column_names() const noexcept { return names_; }

    // Original CSV data-row numbers (1-based, counted after the header).
    std::span<const std::size_t> row_ids() const noexcept { return row_ids_; }

private:
    std::vector<std::string> names_;
    std::vector<Column> columns_;
    std::vector<std::size_t> row_ids_;
};

enum class MissingPolicy { Strict, DropRows };

// Which columns to read and how. Columns not listed are ignored. An empty
// schema reads every header column as numeric.
struct CsvSchema {
    std::vector<std::string> numeric;
    std::vector<std::string> categorical;
    MissingPolicy missing = MissingPolicy::Strict;
};

struct LoadResult {
    Dataset data;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
};

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema);
LoadResult parse_csv(std::istream& in, const CsvSchema& schema);

// Splits one logical CSV record (RFC-4180 quoting) from `in`. Returns false at
// end of input. Quoted fields may span lines.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

struct ModelSpec {
    std::string outcome;
    std::vector<std::string> regressors;
    // Endogenous regressors and their excluded instruments, matched by
    // position. Empty means OLS.
    std::vector<std::string> endogenous;
    std::vector<std::string> instruments;
    bool intercept = false;
    std::optional<std::string> weights;
    std::optional<std::string> clusters;
};

struct RegressionProblem {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::optional<Eigen::MatrixXd> z;
    std::optional<Eigen::VectorXd> base_weights;
    std::optional<std::vector<int>> clusters;
    std::vector<std::string> regressor_names;
    std::vector<std::size_t> row_ids;

    Eigen::Index n_obs() const noexcept { return y.size(); }
    Eigen::Index n_params() const noexcept { return x.cols(); }
    bool is_iv() const noexcept { return z.has_value(); }

    // Instruments if present, otherwise the regressors.
    const Eigen::MatrixXd& instruments() const noexcept { return z ? *z : x; }
    // Per-row base weight (1 when no base weights were given).
    double base_weight(Eigen::Index n) const { return base_weights ? (*base_weights)(n) : 1.0; }

    // Throws BoundsError when no regressor has that name.
    Eigen::Index index_of(const std::string& regressor) const;
};

struct ProblemData {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::optional<Eigen::MatrixXd> z;
    std::optional<Eigen::VectorXd> base_weights;
    std::optional<std::vector<int>> clusters;
    std::vector<std::string> regressor_names;
    std::vector<std::size_t> row_ids;
};

// Validates shapes, finiteness, weights and rank, and fills default names and
// row ids.
RegressionProblem make_problem(ProblemData data);

RegressionProblem build_problem(const Dataset& data, const ModelSpec& spec);

// Smallest over largest singular value must exceed this for a design to count
// as full rank.
inline constexpr double kRankTolerance = 1e-10;

// Singular-value rank check used by build_problem.
bool has_full_column_rank(const Eigen::MatrixXd& m, double tolerance = kRankTolerance);

}  // namespace amip
