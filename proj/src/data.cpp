#include "orthodid/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace orthodid {

CovariateMatrix::CovariateMatrix(MatrixXd v, std::vector<std::string> names)
    : values(std::move(v)), column_names(std::move(names)) {
    validate();
}

void CovariateMatrix::validate() const {
    if (!values.allFinite()) throw DataError("covariate matrix contains non-finite entries");
    if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != values.cols()) {
        throw DataError("covariate name count does not match column count");
    }
}

namespace {

void require_length(Eigen::Index got, Eigen::Index n, const char* what) {
    if (got != n) {
        throw DataError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                        std::to_string(n));
    }
}

void require_binary(const VectorXi& v, const char* what) {
    bool zero = false;
    bool one = false;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) == 0) {
            zero = true;
        } else if (v(i) == 1) {
            one = true;
        } else {
            throw DataError(std::string(what) + ": indicator out of range");
        }
    }
    if (!zero || !one) throw DataError(std::string(what) + ": both values 0 and 1 must be present");
}

}  // namespace

void RepeatedOutcomesData::validate() const {
    const auto n = d.size();
    require_length(y_pre.size(), n, "y_pre");
    require_length(y_post.size(), n, "y_post");
    require_length(x.rows(), n, "covariate rows");
    if (!y_pre.allFinite() || !y_post.allFinite()) throw DataError("outcomes contain non-finite values");
    require_binary(d, "treatment");
    x.validate();
}

void RepeatedCrossSectionData::validate() const {
    const auto n = d.size();
    require_length(y.size(), n, "y");
    require_length(t.size(), n, "time");
    require_length(x.rows(), n, "covariate rows");
    if (!y.allFinite()) throw DataError("outcome contains non-finite values");
    require_binary(d, "treatment");
    require_binary(t, "time");
    x.validate();
}

void MultilevelData::validate() const {
    const auto n = w.size();
    require_length(y_pre.size(), n, "y_pre");
    require_length(y_post.size(), n, "y_post");
    require_length(x.rows(), n, "covariate rows");
    if (!y_pre.allFinite() || !y_post.allFinite()) throw DataError("outcomes contain non-finite values");
    if (levels < 1) throw DataError("multilevel data needs at least one nonzero level");
    std::vector<bool> seen(static_cast<std::size_t>(levels) + 1, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (w(i) < 0 || w(i) > levels) throw DataError("treatment level out of range");
        seen[static_cast<std::size_t>(w(i))] = true;
    }
    for (int level = 0; level <= levels; ++level) {
        if (!seen[static_cast<std::size_t>(level)]) {
            throw DataError("treatment level " + std::to_string(level) + " is absent");
        }
    }
    x.validate();
}

Design design_of(const Dataset& data) {
    struct Visitor {
        Design operator()(const RepeatedOutcomesData&) const { return Design::RepeatedOutcomes; }
        Design operator()(const RepeatedCrossSectionData&) const { return Design::RepeatedCrossSection; }
        Design operator()(const MultilevelData&) const { return Design::Multilevel; }
    };
    return std::visit(Visitor{}, data);
}

Eigen::Index size_of(const Dataset& data) {
    return std::visit([](const auto& d) { return d.size(); }, data);
}

const CovariateMatrix& covariates_of(const Dataset& data) {
    return std::visit([](const auto& d) -> const CovariateMatrix& { return d.x; }, data);
}

IndexVector FoldPlan::fold(int index) const {
    IndexVector out;
    for (Eigen::Index i = 0; i < assignment.size(); ++i) {
        if (assignment(i) == index) out.push_back(i);
    }
    return out;
}

IndexVector FoldPlan::complement(int index) const {
    IndexVector out;
    for (Eigen::Index i = 0; i < assignment.size(); ++i) {
        if (assignment(i) != index) out.push_back(i);
    }
    return out;
}

std::vector<Eigen::Index> FoldPlan::fold_sizes() const {
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < assignment.size(); ++i) ++sizes[static_cast<std::size_t>(assignment(i))];
    return sizes;
}

FoldPlan make_folds(Eigen::Index n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    if (k > n) throw ConfigError("fold count exceeds number of observations");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.resize(n);
    const Eigen::Index base = n / k;
    const Eigen::Index extra = n % k;
    Eigen::Index pos = 0;
    for (int f = 0; f < k; ++f) {
        const Eigen::Index len = base + (f < extra ? 1 : 0);
        for (Eigen::Index j = 0; j < len; ++j) plan.assignment(perm[static_cast<std::size_t>(pos++)]) = f;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    char c;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            end_row();
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted field in CSV");
    if (field_started || !row.empty()) end_row();
    return rows;
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

std::optional<double> parse_number(const std::string& cell) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

struct RoleSpec {
    const char* role;
    bool indicator;
    bool level;
};

std::vector<RoleSpec> roles_for(Design design) {
    switch (design) {
        case Design::RepeatedOutcomes:
            return {{"y_pre", false, false}, {"y_post", false, false}, {"treat", true, false}};
        case Design::RepeatedCrossSection:
            return {{"y", false, false}, {"time", true, false}, {"treat", true, false}};
        case Design::Multilevel:
            return {{"y_pre", false, false}, {"y_post", false, false}, {"level", false, true}};
    }
    return {};
}

}  // namespace

LoadResult load_dataset(const std::filesystem::path& path, Design design, const ColumnMap& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file '" + path.string() + "'");
    return read_dataset(in, design, columns);
}

LoadResult read_dataset(std::istream& in, Design design, const ColumnMap& columns) {
    auto rows = parse_csv(in);
    if (rows.empty()) throw DataError("CSV has no header row");
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(trim(h));
    // Strip a UTF-8 byte-order mark on the first header cell.
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);

    std::map<std::string, std::size_t> index_of;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!index_of.emplace(header[j], j).second) {
            throw DataError("duplicate column name '" + header[j] + "'");
        }
    }

    const auto specs = roles_for(design);
    std::vector<std::size_t> role_cols;
    std::set<std::size_t> used;
    for (const auto& spec : specs) {
        auto it = columns.roles.find(spec.role);
        if (it == columns.roles.end()) {
            throw ConfigError(std::string("no column mapped for role '") + spec.role + "'");
        }
        auto col = index_of.find(it->second);
        if (col == index_of.end()) throw DataError("column '" + it->second + "' not found");
        if (!used.insert(col->second).second) {
            throw ConfigError("column '" + it->second + "' mapped to more than one role");
        }
        role_cols.push_back(col->second);
    }

    const std::size_t body_rows = rows.size() - 1;
    auto cell = [&](std::size_t r, std::size_t c) -> std::string {
        const auto& row = rows[r + 1];
        return c < row.size() ? trim(row[c]) : std::string{};
    };

    std::vector<std::size_t> cov_cols;
    if (!columns.covariates.empty()) {
        for (const auto& name : columns.covariates) {
            auto col = index_of.find(name);
            if (col == index_of.end()) throw DataError("covariate column '" + name + "' not found");
            if (used.count(col->second)) {
                throw ConfigError("column '" + name + "' is both a role column and a covariate");
            }
            if (std::find(cov_cols.begin(), cov_cols.end(), col->second) != cov_cols.end()) {
                throw ConfigError("covariate column '" + name + "' listed twice");
            }
            cov_cols.push_back(col->second);
        }
    } else {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (used.count(j)) continue;
            bool numeric = true;
            for (std::size_t r = 0; r < body_rows && numeric; ++r) {
                auto v = cell(r, j);
                numeric = is_missing(v) || parse_number(v).has_value();
            }
            if (numeric) cov_cols.push_back(j);
        }
    }

    std::vector<std::size_t> all_cols = role_cols;
    all_cols.insert(all_cols.end(), cov_cols.begin(), cov_cols.end());

    std::vector<std::vector<double>> parsed;
    parsed.reserve(body_rows);
    std::size_t rejected = 0;
    for (std::size_t r = 0; r < body_rows; ++r) {
        std::vector<double> values;
        values.reserve(all_cols.size());
        bool missing = false;
        for (auto c : all_cols) {
            auto text = cell(r, c);
            if (is_missing(text)) {
                missing = true;
                continue;
            }
            auto v = parse_number(text);
            if (!v) {
                throw DataError("non-numeric value '" + text + "' in column '" + header[c] + "' (row " +
                                std::to_string(r + 1) + ")");
            }
            values.push_back(*v);
        }
        if (missing) {
            ++rejected;
            continue;
        }
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const double v = values[k];
            if (specs[k].indicator && v != 0.0 && v != 1.0) {
                throw DataError("column '" + header[role_cols[k]] + "': indicator out of range");
            }
            if (specs[k].level && (v < 0.0 || v != std::floor(v))) {
                throw DataError("column '" + header[role_cols[k]] +
                                "': treatment level must be a non-negative integer");
            }
        }
        parsed.push_back(std::move(values));
    }

    const auto n = static_cast<Eigen::Index>(parsed.size());
    const auto p = static_cast<Eigen::Index>(cov_cols.size());
    if (n == 0) throw DataError("no complete rows in input");
    MatrixXd x(n, p);
    std::vector<std::string> names;
    for (auto c : cov_cols) names.push_back(header[c]);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = parsed[static_cast<std::size_t>(i)][specs.size() + static_cast<std::size_t>(j)];
    }
    auto col = [&](std::size_t k) {
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = parsed[static_cast<std::size_t>(i)][k];
        return v;
    };

    LoadResult result{RepeatedOutcomesData{}, body_rows, rejected};
    CovariateMatrix cov(std::move(x), std::move(names));
    switch (design) {
        case Design::RepeatedOutcomes: {
            RepeatedOutcomesData d{col(0), col(1), col(2).cast<int>(), std::move(cov)};
            d.validate();
            result.dataset = std::move(d);
            break;
        }
        case Design::RepeatedCrossSection: {
            RepeatedCrossSectionData d{col(0), col(1).cast<int>(), col(2).cast<int>(), std::move(cov)};
            d.validate();
            result.dataset = std::move(d);
            break;
        }
        case Design::Multilevel: {
            MultilevelData d{col(0), col(1), col(2).cast<int>(), std::move(cov), 0};
            d.levels = d.w.size() ? d.w.maxCoeff() : 0;
            d.validate();
            result.dataset = std::move(d);
            break;
        }
    }
    return result;
}

namespace {

void put(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

void write_rows(std::ostream& out, const std::vector<std::string>& lead_names,
                const std::vector<VectorXd>& lead, const CovariateMatrix& x) {
    for (std::size_t k = 0; k < lead_names.size(); ++k) out << (k ? "," : "") << lead_names[k];
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out << ',';
        if (x.column_names.empty()) {
            out << 'x' << (j + 1);
        } else {
            out << x.column_names[static_cast<std::size_t>(j)];
        }
    }
    out << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t k = 0; k < lead.size(); ++k) {
            if (k) out << ',';
            put(out, lead[k](i));
        }
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            out << ',';
            put(out, x.values(i, j));
        }
        out << '\n';
    }
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data) {
    struct Visitor {
        std::ostream& out;
        void operator()(const RepeatedOutcomesData& d) const {
            write_rows(out, {"y_pre", "y_post", "d"}, {d.y_pre, d.y_post, d.d.cast<double>()}, d.x);
        }
        void operator()(const RepeatedCrossSectionData& d) const {
            write_rows(out, {"y", "t", "d"}, {d.y, d.t.cast<double>(), d.d.cast<double>()}, d.x);
        }
        void operator()(const MultilevelData& d) const {
            write_rows(out, {"y_pre", "y_post", "w"}, {d.y_pre, d.y_post, d.w.cast<double>()}, d.x);
        }
    };
    std::visit(Visitor{out}, data);
}

}  // namespace orthodid
