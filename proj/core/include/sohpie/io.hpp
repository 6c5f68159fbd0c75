#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace sohpie {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// n x p count table: rows are samples, columns are taxa.
struct OtuTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> taxon_names;
    CountMatrix counts;

    Eigen::Index n() const { return counts.rows(); }
    Eigen::Index p() const { return counts.cols(); }
};

enum class TableFormat { tsv, csv };

// Format inferred from the file extension; ".csv" selects CSV, anything else TSV.
TableFormat format_from_path(const std::string& path);

OtuTable load_otu_table(const std::string& path, TableFormat format);
OtuTable load_otu_table(const std::string& path);
void write_otu_table(const OtuTable& table, const std::string& path, TableFormat format);
void write_otu_table(const OtuTable& table, const std::string& path);

// Keeps rows of `table` (samples) at the given indices, in the given order.
OtuTable select_samples(const OtuTable& table, const std::vector<Eigen::Index>& rows);
// Keeps columns of `table` (taxa) at the given indices, in the given order.
OtuTable select_taxa(const OtuTable& table, const std::vector<Eigen::Index>& cols);
// Stacks two tables with identical taxon columns; sample ids must stay unique.
OtuTable concat_samples(const OtuTable& a, const OtuTable& b);

enum class ColumnKind { numeric, categorical };

// Raw metadata column; cells may be missing ("", NA, NaN, N/A, case-insensitive).
struct CovariateColumn {
    std::string name;
    ColumnKind kind = ColumnKind::categorical;
    std::vector<std::string> cells;
};

struct CovariateFrame {
    std::vector<std::string> sample_ids;
    std::vector<CovariateColumn> columns;

    const CovariateColumn* find(const std::string& name) const;
    Eigen::Index n() const { return static_cast<Eigen::Index>(sample_ids.size()); }
};

bool is_missing_cell(const std::string& cell);

CovariateFrame load_covariates(const std::string& path);
CovariateFrame load_covariates(const std::string& path, TableFormat format);
void write_covariates(const CovariateFrame& frame, const std::string& path);
void write_covariates(const CovariateFrame& frame, const std::string& path, TableFormat format);

struct ExclusionReport {
    struct Entry {
        std::string sample_id;
        std::string reason;
    };
    std::vector<Entry> dropped;
    std::vector<std::string> warnings;

    // One "DROPPED <sample_id> <reason>" line per exclusion.
    std::string to_text() const;
};

// Samples partitioned by group, stacked reference-group-first. The covariate
// frame rows follow the same stacked order as group() and stacked sample ids.
struct AlignedDataset {
    OtuTable group1;                  // reference group
    OtuTable group2;
    std::string group_level1;
    std::string group_level2;
    CovariateFrame covariates;        // group column plus requested covariates
    std::string group_col;
    ExclusionReport report;

    Eigen::Index n1() const { return group1.n(); }
    Eigen::Index n2() const { return group2.n(); }
    // 0 for group1 rows, 1 for group2 rows, in stacked order.
    std::vector<int> group_indicator() const;
};

// Intersects sample ids, drops samples missing the group or any requested
// covariate (complete-case), and partitions by the two group levels.
// reference_group == "" picks the alphabetically first level.
AlignedDataset align(const OtuTable& otu, const CovariateFrame& covs,
                     const std::string& group_col,
                     const std::vector<std::string>& covariate_cols,
                     const std::string& reference_group = "");

OtuTable stacked_otu(const AlignedDataset& data);

struct FilterResult {
    OtuTable table;
    std::vector<std::string> retained;
    std::vector<std::string> dropped;
};

// Drops taxa with nonzero counts in fewer than prevalence * n samples.
FilterResult filter_rare_taxa(const OtuTable& otu, double prevalence);

} // namespace sohpie
