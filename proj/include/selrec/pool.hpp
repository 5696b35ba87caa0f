#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selrec {

enum class CovariateKind { Binary, Continuous };

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Continuous;
};

enum class OutcomeKind { None, Binary, Survival };

// Column-major table of candidate participants. Binary covariates are coded
// +1 / -1; continuous covariates are arbitrary doubles (usually rescaled so
// the 5th/95th percentiles sit at -1/+1, see fit_scaling below). A pool may
// additionally carry one outcome: a +/-1 label column, or a survival pair
// (time, event indicator).
class Pool {
public:
    Pool(std::vector<CovariateSpec> specs, std::vector<std::vector<double>> columns);

    void attach_binary_outcome(std::vector<double> y);
    void attach_survival_outcome(std::vector<double> time, std::vector<unsigned char> event);

    std::size_t size() const { return rows_; }
    std::size_t dim() const { return specs_.size(); }

    const std::vector<CovariateSpec>& specs() const { return specs_; }
    const CovariateSpec& spec(std::size_t j) const { return specs_.at(j); }
    std::span<const double> column(std::size_t j) const { return columns_.at(j); }
    std::optional<std::size_t> column_index(std::string_view name) const;
    double value(std::size_t row, std::size_t col) const { return columns_[col][row]; }

    OutcomeKind outcome_kind() const { return outcome_kind_; }
    std::span<const double> binary_outcome() const;
    std::span<const double> survival_time() const;
    std::span<const unsigned char> survival_event() const;

    // New pool holding the given rows (in the given order), outcome included.
    Pool subset(std::span<const std::size_t> rows) const;

private:
    std::vector<CovariateSpec> specs_;
    std::vector<std::vector<double>> columns_;
    std::size_t rows_ = 0;
    OutcomeKind outcome_kind_ = OutcomeKind::None;
    std::vector<double> y_;
    std::vector<double> time_;
    std::vector<unsigned char> event_;
};

// Affine per-column rescaling fitted on continuous covariates: maps the
// 5th percentile to -1 and the 95th to +1. Binary columns pass through.
struct ScalingTransform {
    struct Affine {
        double scale = 1.0;
        double offset = 0.0;
    };
    std::vector<std::optional<Affine>> columns;

    ScalingTransform inverse() const;
};

ScalingTransform fit_scaling(const Pool& pool);
Pool apply_scaling(const Pool& pool, const ScalingTransform& transform);

// CSV I/O. Expected layout: header row naming every column, one row per
// candidate, comma separated. Covariate columns are matched to the spec by
// name; unknown columns are ignored. Outcome columns when requested:
// "y" (+1/-1) for binary outcomes, "time" and "event" (0/1) for survival.
Pool ingest_csv(std::istream& in, std::span<const CovariateSpec> specs,
                OutcomeKind outcome = OutcomeKind::None);
Pool ingest_csv(const std::filesystem::path& path, std::span<const CovariateSpec> specs,
                OutcomeKind outcome = OutcomeKind::None);

void write_csv(const Pool& pool, std::ostream& out);
void write_csv(const Pool& pool, const std::filesystem::path& path);

}  // namespace selrec
