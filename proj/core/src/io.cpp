#include "sohpie/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace sohpie {

namespace {

char delimiter_for(TableFormat format) {
    return format == TableFormat::csv ? ',' : '\t';
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, delim)) fields.push_back(field);
    if (!line.empty() && line.back() == delim) fields.emplace_back();
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(strip_cr(line));
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

void check_unique(const std::vector<std::string>& names, const std::string& what,
                  const std::string& path) {
    std::unordered_set<std::string> seen;
    for (const auto& name : names) {
        if (!seen.insert(name).second)
            throw std::runtime_error(path + ": duplicate " + what + " '" + name + "'");
    }
}

} // namespace

TableFormat format_from_path(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot != std::string::npos) {
        std::string ext = path.substr(dot + 1);
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == "csv") return TableFormat::csv;
    }
    return TableFormat::tsv;
}

OtuTable load_otu_table(const std::string& path, TableFormat format) {
    const char delim = delimiter_for(format);
    auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");

    auto header = split_line(lines[0], delim);
    if (header.size() < 2)
        throw std::runtime_error(path + ": header must name a sample id column and at least one taxon");

    OtuTable table;
    table.taxon_names.assign(header.begin() + 1, header.end());
    check_unique(table.taxon_names, "taxon name", path);

    const auto p = static_cast<Eigen::Index>(table.taxon_names.size());
    const auto n = static_cast<Eigen::Index>(lines.size()) - 1;
    table.counts.resize(n, p);

    for (Eigen::Index i = 0; i < n; ++i) {
        auto fields = split_line(lines[static_cast<std::size_t>(i) + 1], delim);
        if (static_cast<Eigen::Index>(fields.size()) != p + 1)
            throw std::runtime_error(path + ": row " + std::to_string(i + 2) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(p + 1));
        table.sample_ids.push_back(fields[0]);
        for (Eigen::Index j = 0; j < p; ++j) {
            const std::string& cell = fields[static_cast<std::size_t>(j) + 1];
            std::int64_t value = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw std::runtime_error(path + ": malformed count '" + cell + "' at row " +
                                         std::to_string(i + 2) + ", column '" +
                                         table.taxon_names[static_cast<std::size_t>(j)] + "'");
            if (value < 0)
                throw std::runtime_error(path + ": negative count " + std::to_string(value) +
                                         " at row " + std::to_string(i + 2) + ", column '" +
                                         table.taxon_names[static_cast<std::size_t>(j)] + "'");
            table.counts(i, j) = value;
        }
    }
    check_unique(table.sample_ids, "sample id", path);
    return table;
}

OtuTable load_otu_table(const std::string& path) {
    return load_otu_table(path, format_from_path(path));
}

void write_otu_table(const OtuTable& table, const std::string& path, TableFormat format) {
    const char delim = delimiter_for(format);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "sample_id";
    for (const auto& taxon : table.taxon_names) out << delim << taxon;
    out << '\n';
    for (Eigen::Index i = 0; i < table.n(); ++i) {
        out << table.sample_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.p(); ++j) out << delim << table.counts(i, j);
        out << '\n';
    }
}

void write_otu_table(const OtuTable& table, const std::string& path) {
    write_otu_table(table, path, format_from_path(path));
}

OtuTable select_samples(const OtuTable& table, const std::vector<Eigen::Index>& rows) {
    OtuTable out;
    out.taxon_names = table.taxon_names;
    out.counts.resize(static_cast<Eigen::Index>(rows.size()), table.p());
    out.sample_ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.sample_ids.push_back(table.sample_ids[static_cast<std::size_t>(rows[r])]);
        out.counts.row(static_cast<Eigen::Index>(r)) = table.counts.row(rows[r]);
    }
    return out;
}

OtuTable select_taxa(const OtuTable& table, const std::vector<Eigen::Index>& cols) {
    OtuTable out;
    out.sample_ids = table.sample_ids;
    out.counts.resize(table.n(), static_cast<Eigen::Index>(cols.size()));
    out.taxon_names.reserve(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.taxon_names.push_back(table.taxon_names[static_cast<std::size_t>(cols[c])]);
        out.counts.col(static_cast<Eigen::Index>(c)) = table.counts.col(cols[c]);
    }
    return out;
}

OtuTable concat_samples(const OtuTable& a, const OtuTable& b) {
    if (a.taxon_names != b.taxon_names)
        throw std::invalid_argument("concat_samples: taxon columns differ");
    OtuTable out;
    out.taxon_names = a.taxon_names;
    out.sample_ids = a.sample_ids;
    out.sample_ids.insert(out.sample_ids.end(), b.sample_ids.begin(), b.sample_ids.end());
    check_unique(out.sample_ids, "sample id", "concat_samples");
    out.counts.resize(a.n() + b.n(), a.p());
    out.counts.topRows(a.n()) = a.counts;
    out.counts.bottomRows(b.n()) = b.counts;
    return out;
}

bool is_missing_cell(const std::string& cell) {
    if (cell.empty()) return true;
    std::string lower;
    lower.reserve(cell.size());
    for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower == "na" || lower == "nan" || lower == "n/a";
}

namespace {

bool parses_as_double(const std::string& cell) {
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    while (begin != end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc() && ptr == end && begin != end;
}

} // namespace

const CovariateColumn* CovariateFrame::find(const std::string& name) const {
    for (const auto& col : columns)
        if (col.name == name) return &col;
    return nullptr;
}

CovariateFrame load_covariates(const std::string& path, TableFormat format) {
    const char delim = delimiter_for(format);
    auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");

    auto header = split_line(lines[0], delim);
    if (header.empty() || header[0] != "sample_id")
        throw std::runtime_error(path + ": first header column must be 'sample_id'");

    CovariateFrame frame;
    frame.columns.resize(header.size() - 1);
    for (std::size_t c = 1; c < header.size(); ++c) frame.columns[c - 1].name = header[c];
    check_unique(header, "column name", path);

    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto fields = split_line(lines[r], delim);
        if (fields.size() != header.size())
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        frame.sample_ids.push_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c)
            frame.columns[c - 1].cells.push_back(fields[c]);
    }
    check_unique(frame.sample_ids, "sample id", path);

    // A column is numeric when every observed cell parses as a number.
    for (auto& col : frame.columns) {
        bool numeric = true;
        bool any_observed = false;
        for (const auto& cell : col.cells) {
            if (is_missing_cell(cell)) continue;
            any_observed = true;
            if (!parses_as_double(cell)) {
                numeric = false;
                break;
            }
        }
        col.kind = (numeric && any_observed) ? ColumnKind::numeric : ColumnKind::categorical;
    }
    return frame;
}

CovariateFrame load_covariates(const std::string& path) {
    return load_covariates(path, format_from_path(path));
}

void write_covariates(const CovariateFrame& frame, const std::string& path, TableFormat format) {
    const char delim = delimiter_for(format);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "sample_id";
    for (const auto& col : frame.columns) out << delim << col.name;
    out << '\n';
    for (std::size_t i = 0; i < frame.sample_ids.size(); ++i) {
        out << frame.sample_ids[i];
        for (const auto& col : frame.columns) {
            if (col.cells.size() != frame.sample_ids.size())
                throw std::runtime_error("write_covariates: column '" + col.name +
                                         "' has " + std::to_string(col.cells.size()) +
                                         " cells for " + std::to_string(frame.sample_ids.size()) +
                                         " samples");
            out << delim << col.cells[i];
        }
        out << '\n';
    }
}

void write_covariates(const CovariateFrame& frame, const std::string& path) {
    write_covariates(frame, path, format_from_path(path));
}

std::string ExclusionReport::to_text() const {
    std::ostringstream out;
    for (const auto& entry : dropped) out << "DROPPED " << entry.sample_id << ' ' << entry.reason << '\n';
    return out.str();
}

std::vector<int> AlignedDataset::group_indicator() const {
    std::vector<int> z(static_cast<std::size_t>(n1() + n2()), 0);
    std::fill(z.begin() + n1(), z.end(), 1);
    return z;
}

AlignedDataset align(const OtuTable& otu, const CovariateFrame& covs,
                     const std::string& group_col,
                     const std::vector<std::string>& covariate_cols,
                     const std::string& reference_group) {
    const CovariateColumn* group = covs.find(group_col);
    if (!group) throw std::invalid_argument("align: group column '" + group_col + "' not found");

    std::vector<const CovariateColumn*> requested;
    for (const auto& name : covariate_cols) {
        const CovariateColumn* col = covs.find(name);
        if (!col) throw std::invalid_argument("align: covariate column '" + name + "' not found");
        requested.push_back(col);
    }

    std::unordered_map<std::string, std::size_t> cov_row;
    for (std::size_t r = 0; r < covs.sample_ids.size(); ++r) cov_row[covs.sample_ids[r]] = r;

    AlignedDataset out;
    out.group_col = group_col;

    // Walk OTU rows in order; keep complete cases present in both files.
    std::vector<Eigen::Index> kept_otu_rows;
    std::vector<std::size_t> kept_cov_rows;
    std::unordered_set<std::string> otu_ids(otu.sample_ids.begin(), otu.sample_ids.end());
    for (Eigen::Index i = 0; i < otu.n(); ++i) {
        const std::string& id = otu.sample_ids[static_cast<std::size_t>(i)];
        auto it = cov_row.find(id);
        if (it == cov_row.end()) {
            out.report.dropped.push_back({id, "not in metadata"});
            continue;
        }
        std::size_t r = it->second;
        if (is_missing_cell(group->cells[r])) {
            out.report.dropped.push_back({id, "missing " + group_col});
            continue;
        }
        bool complete = true;
        for (const auto* col : requested) {
            if (is_missing_cell(col->cells[r])) {
                out.report.dropped.push_back({id, "missing " + col->name});
                complete = false;
                break;
            }
        }
        if (!complete) continue;
        kept_otu_rows.push_back(i);
        kept_cov_rows.push_back(r);
    }
    for (const auto& id : covs.sample_ids)
        if (!otu_ids.count(id)) out.report.dropped.push_back({id, "not in OTU table"});

    std::set<std::string> levels;
    for (std::size_t k = 0; k < kept_cov_rows.size(); ++k) levels.insert(group->cells[kept_cov_rows[k]]);
    if (levels.size() < 2)
        throw std::runtime_error("align: only " + std::to_string(levels.size()) +
                                 " group level(s) present after alignment; need exactly 2");
    if (levels.size() > 2)
        throw std::runtime_error("align: group column '" + group_col + "' has " +
                                 std::to_string(levels.size()) + " levels; need exactly 2");

    std::string ref = reference_group.empty() ? *levels.begin() : reference_group;
    if (!levels.count(ref))
        throw std::invalid_argument("align: reference group '" + ref + "' not among observed levels");
    std::string other;
    for (const auto& level : levels)
        if (level != ref) other = level;
    out.group_level1 = ref;
    out.group_level2 = other;

    std::vector<Eigen::Index> rows1, rows2;
    std::vector<std::size_t> cov1, cov2;
    for (std::size_t k = 0; k < kept_otu_rows.size(); ++k) {
        if (group->cells[kept_cov_rows[k]] == ref) {
            rows1.push_back(kept_otu_rows[k]);
            cov1.push_back(kept_cov_rows[k]);
        } else {
            rows2.push_back(kept_otu_rows[k]);
            cov2.push_back(kept_cov_rows[k]);
        }
    }
    if (rows1.size() < 3 || rows2.size() < 3)
        throw std::runtime_error("align: group sizes n1=" + std::to_string(rows1.size()) +
                                 ", n2=" + std::to_string(rows2.size()) +
                                 "; each group needs at least 3 samples");

    out.group1 = select_samples(otu, rows1);
    out.group2 = select_samples(otu, rows2);

    std::vector<std::size_t> cov_order = cov1;
    cov_order.insert(cov_order.end(), cov2.begin(), cov2.end());

    out.covariates.sample_ids = out.group1.sample_ids;
    out.covariates.sample_ids.insert(out.covariates.sample_ids.end(),
                                     out.group2.sample_ids.begin(), out.group2.sample_ids.end());
    CovariateColumn aligned_group;
    aligned_group.name = group_col;
    aligned_group.kind = ColumnKind::categorical;
    for (std::size_t r : cov_order) aligned_group.cells.push_back(group->cells[r]);
    out.covariates.columns.push_back(std::move(aligned_group));

    for (const auto* col : requested) {
        CovariateColumn aligned;
        aligned.name = col->name;
        aligned.kind = col->kind;
        for (std::size_t r : cov_order) aligned.cells.push_back(col->cells[r]);
        if (aligned.kind == ColumnKind::categorical) {
            std::set<std::string> observed(aligned.cells.begin(), aligned.cells.end());
            if (observed.size() < 2) {
                out.report.warnings.push_back("covariate '" + col->name +
                                              "' has a single observed level; dropped");
                continue;
            }
        }
        out.covariates.columns.push_back(std::move(aligned));
    }
    return out;
}

OtuTable stacked_otu(const AlignedDataset& data) {
    return concat_samples(data.group1, data.group2);
}

FilterResult filter_rare_taxa(const OtuTable& otu, double prevalence) {
    if (prevalence < 0.0 || prevalence > 1.0)
        throw std::invalid_argument("filter_rare_taxa: prevalence must be in [0, 1]");
    const double cutoff = prevalence * static_cast<double>(otu.n());
    FilterResult result;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < otu.p(); ++j) {
        Eigen::Index present = 0;
        for (Eigen::Index i = 0; i < otu.n(); ++i)
            if (otu.counts(i, j) != 0) ++present;
        if (static_cast<double>(present) >= cutoff) {
            keep.push_back(j);
            result.retained.push_back(otu.taxon_names[static_cast<std::size_t>(j)]);
        } else {
            result.dropped.push_back(otu.taxon_names[static_cast<std::size_t>(j)]);
        }
    }
    if (keep.empty()) throw std::runtime_error("filter_rare_taxa: all taxa filtered out");
    result.table = select_taxa(otu, keep);
    return result;
}

} // namespace sohpie
