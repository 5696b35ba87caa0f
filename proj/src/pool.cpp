#include "selrec/pool.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "selrec/errors.hpp"
#include "selrec/format.hpp"
#include "selrec/stats.hpp"

namespace selrec {

namespace {

bool is_pm_one(double v) { return v == 1.0 || v == -1.0; }

void check_binary_column(const std::vector<double>& col, const std::string& name) {
    for (std::size_t i = 0; i < col.size(); ++i) {
        if (!is_pm_one(col[i])) throw InvalidBinaryValue(i, name, col[i]);
    }
}

}  // namespace

Pool::Pool(std::vector<CovariateSpec> specs, std::vector<std::vector<double>> columns)
    : specs_(std::move(specs)), columns_(std::move(columns)) {
    if (specs_.size() != columns_.size()) {
        throw SpecMismatch("covariate spec lists " + std::to_string(specs_.size()) +
                           " columns but " + std::to_string(columns_.size()) +
                           " were provided");
    }
    if (columns_.empty()) throw SpecMismatch("pool needs at least one covariate");
    rows_ = columns_.front().size();
    if (rows_ == 0) throw EmptyFile("pool has no rows");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].size() != rows_) {
            throw LengthMismatch("column " + specs_[j].name + " has " +
                                 std::to_string(columns_[j].size()) + " rows, expected " +
                                 std::to_string(rows_));
        }
        for (double v : columns_[j]) {
            if (!std::isfinite(v)) {
                throw InvalidValue("non-finite value in column " + specs_[j].name);
            }
        }
        if (specs_[j].kind == CovariateKind::Binary) {
            check_binary_column(columns_[j], specs_[j].name);
        }
    }
}

void Pool::attach_binary_outcome(std::vector<double> y) {
    if (y.size() != rows_) throw LengthMismatch("outcome length does not match pool size");
    check_binary_column(y, "y");
    y_ = std::move(y);
    time_.clear();
    event_.clear();
    outcome_kind_ = OutcomeKind::Binary;
}

void Pool::attach_survival_outcome(std::vector<double> time, std::vector<unsigned char> event) {
    if (time.size() != rows_ || event.size() != rows_) {
        throw LengthMismatch("survival outcome length does not match pool size");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        if (!(time[i] > 0.0) || !std::isfinite(time[i])) {
            throw InvalidValue("survival time at row " + std::to_string(i) +
                               " must be positive and finite");
        }
        if (event[i] > 1) {
            throw InvalidValue("event indicator at row " + std::to_string(i) +
                               " must be 0 or 1");
        }
    }
    time_ = std::move(time);
    event_ = std::move(event);
    y_.clear();
    outcome_kind_ = OutcomeKind::Survival;
}

std::optional<std::size_t> Pool::column_index(std::string_view name) const {
    for (std::size_t j = 0; j < specs_.size(); ++j) {
        if (specs_[j].name == name) return j;
    }
    return std::nullopt;
}

std::span<const double> Pool::binary_outcome() const {
    if (outcome_kind_ != OutcomeKind::Binary) {
        throw SpecMismatch("pool carries no binary outcome");
    }
    return y_;
}

std::span<const double> Pool::survival_time() const {
    if (outcome_kind_ != OutcomeKind::Survival) {
        throw SpecMismatch("pool carries no survival outcome");
    }
    return time_;
}

std::span<const unsigned char> Pool::survival_event() const {
    if (outcome_kind_ != OutcomeKind::Survival) {
        throw SpecMismatch("pool carries no survival outcome");
    }
    return event_;
}

Pool Pool::subset(std::span<const std::size_t> rows) const {
    if (rows.empty()) throw InvalidValue("subset needs at least one row");
    std::vector<std::vector<double>> cols(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        cols[j].reserve(rows.size());
        for (std::size_t r : rows) {
            if (r >= rows_) throw InvalidValue("subset row index out of range");
            cols[j].push_back(columns_[j][r]);
        }
    }
    Pool out(specs_, std::move(cols));
    if (outcome_kind_ == OutcomeKind::Binary) {
        std::vector<double> y;
        y.reserve(rows.size());
        for (std::size_t r : rows) y.push_back(y_[r]);
        out.attach_binary_outcome(std::move(y));
    } else if (outcome_kind_ == OutcomeKind::Survival) {
        std::vector<double> t;
        std::vector<unsigned char> e;
        t.reserve(rows.size());
        e.reserve(rows.size());
        for (std::size_t r : rows) {
            t.push_back(time_[r]);
            e.push_back(event_[r]);
        }
        out.attach_survival_outcome(std::move(t), std::move(e));
    }
    return out;
}

ScalingTransform ScalingTransform::inverse() const {
    ScalingTransform inv;
    inv.columns.reserve(columns.size());
    for (const auto& c : columns) {
        if (!c) {
            inv.columns.push_back(std::nullopt);
        } else {
            inv.columns.push_back(Affine{1.0 / c->scale, -c->offset / c->scale});
        }
    }
    return inv;
}

ScalingTransform fit_scaling(const Pool& pool) {
    ScalingTransform t;
    t.columns.reserve(pool.dim());
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        if (pool.spec(j).kind == CovariateKind::Binary) {
            t.columns.push_back(std::nullopt);
            continue;
        }
        auto col = pool.column(j);
        std::vector<double> sorted(col.begin(), col.end());
        std::sort(sorted.begin(), sorted.end());
        const double q05 = quantile_sorted(sorted, 0.05);
        const double q95 = quantile_sorted(sorted, 0.95);
        if (!(q95 > q05)) {
            throw DegenerateCovariate("column " + pool.spec(j).name +
                                      " has equal 5th and 95th percentiles");
        }
        // Affine map sending q05 -> -1 and q95 -> +1.
        const double scale = 2.0 / (q95 - q05);
        const double offset = -(q95 + q05) / (q95 - q05);
        t.columns.push_back(ScalingTransform::Affine{scale, offset});
    }
    return t;
}

Pool apply_scaling(const Pool& pool, const ScalingTransform& transform) {
    if (transform.columns.size() != pool.dim()) {
        throw SpecMismatch("scaling transform has " +
                           std::to_string(transform.columns.size()) +
                           " columns, pool has " + std::to_string(pool.dim()));
    }
    std::vector<std::vector<double>> cols;
    cols.reserve(pool.dim());
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        auto col = pool.column(j);
        std::vector<double> out(col.begin(), col.end());
        if (const auto& aff = transform.columns[j]) {
            if (pool.spec(j).kind == CovariateKind::Binary) {
                throw SpecMismatch("scaling transform targets binary column " +
                                   pool.spec(j).name);
            }
            for (double& v : out) v = aff->scale * v + aff->offset;
        }
        cols.push_back(std::move(out));
    }
    Pool scaled(pool.specs(), std::move(cols));
    if (pool.outcome_kind() == OutcomeKind::Binary) {
        auto y = pool.binary_outcome();
        scaled.attach_binary_outcome(std::vector<double>(y.begin(), y.end()));
    } else if (pool.outcome_kind() == OutcomeKind::Survival) {
        auto t = pool.survival_time();
        auto e = pool.survival_event();
        scaled.attach_survival_outcome(std::vector<double>(t.begin(), t.end()),
                                       std::vector<unsigned char>(e.begin(), e.end()));
    }
    return scaled;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string text = trim(raw);
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || text.empty()) {
        throw NonNumericCell(row, col, raw);
    }
    return v;
}

}  // namespace

Pool ingest_csv(std::istream& in, std::span<const CovariateSpec> specs, OutcomeKind outcome) {
    std::string header_line;
    if (!std::getline(in, header_line)) throw EmptyFile("csv input is empty");
    const std::vector<std::string> header = split_csv_line(header_line);

    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (trim(header[j]) == name) return j;
        }
        throw MissingColumn(name);
    };

    std::vector<std::size_t> cov_pos;
    cov_pos.reserve(specs.size());
    for (const auto& s : specs) cov_pos.push_back(find_column(s.name));

    std::size_t y_pos = 0, time_pos = 0, event_pos = 0;
    if (outcome == OutcomeKind::Binary) {
        y_pos = find_column("y");
    } else if (outcome == OutcomeKind::Survival) {
        time_pos = find_column("time");
        event_pos = find_column("event");
    }

    std::vector<std::vector<double>> cols(specs.size());
    std::vector<double> y, time;
    std::vector<unsigned char> event;

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw SpecMismatch("row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < specs.size(); ++j) {
            cols[j].push_back(parse_cell(fields[cov_pos[j]], row, cov_pos[j]));
        }
        if (outcome == OutcomeKind::Binary) {
            y.push_back(parse_cell(fields[y_pos], row, y_pos));
        } else if (outcome == OutcomeKind::Survival) {
            time.push_back(parse_cell(fields[time_pos], row, time_pos));
            const double ev = parse_cell(fields[event_pos], row, event_pos);
            if (ev != 0.0 && ev != 1.0) {
                throw InvalidValue("event indicator at row " + std::to_string(row) +
                                   " must be 0 or 1, got " + format_double(ev));
            }
            event.push_back(static_cast<unsigned char>(ev));
        }
        ++row;
    }
    if (row == 0) throw EmptyFile("csv input has a header but no data rows");

    Pool pool(std::vector<CovariateSpec>(specs.begin(), specs.end()), std::move(cols));
    if (outcome == OutcomeKind::Binary) {
        pool.attach_binary_outcome(std::move(y));
    } else if (outcome == OutcomeKind::Survival) {
        pool.attach_survival_outcome(std::move(time), std::move(event));
    }
    return pool;
}

Pool ingest_csv(const std::filesystem::path& path, std::span<const CovariateSpec> specs,
                OutcomeKind outcome) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open csv file: " + path.string());
    return ingest_csv(in, specs, outcome);
}

void write_csv(const Pool& pool, std::ostream& out) {
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        if (j) out << ',';
        out << pool.spec(j).name;
    }
    if (pool.outcome_kind() == OutcomeKind::Binary) {
        out << ",y";
    } else if (pool.outcome_kind() == OutcomeKind::Survival) {
        out << ",time,event";
    }
    out << '\n';
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = 0; j < pool.dim(); ++j) {
            if (j) out << ',';
            out << format_double(pool.value(i, j));
        }
        if (pool.outcome_kind() == OutcomeKind::Binary) {
            out << ',' << format_double(pool.binary_outcome()[i]);
        } else if (pool.outcome_kind() == OutcomeKind::Survival) {
            out << ',' << format_double(pool.survival_time()[i]) << ','
                << static_cast<int>(pool.survival_event()[i]);
        }
        out << '\n';
    }
}

void write_csv(const Pool& pool, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidConfig("cannot open output file: " + path.string());
    write_csv(pool, out);
}

}  // namespace selrec
