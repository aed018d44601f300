#ifndef NETLATTICE_REPORT_HPP
#define NETLATTICE_REPORT_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "netlattice/spectral.hpp"
#include "netlattice/theory.hpp"

namespace netlattice {

/// Declared tolerances for point-wise comparison.
struct Tolerances {
    double relative = 0.0;           ///< |measured - predicted| <= relative |predicted|
    double z = 4.0;                  ///< ... or |measured - predicted| <= z stderr
    double min_pass_fraction = 1.0;  ///< fraction of rows that must pass
};

struct ComparisonRow {
    std::string point;     ///< sweep point tag, e.g. "weight_variance=0.5"
    std::string quantity;  ///< e.g. "r", "var", "cov_pp"
    double x = 0.0;        ///< abscissa (sweep value or q)
    double predicted = 0.0;
    double measured = 0.0;
    double stderr_ = 0.0;
    double rel_dev = 0.0;        ///< (measured - predicted) / |predicted|
    double z = 0.0;              ///< (measured - predicted) / stderr
    double tolerance = 0.0;      ///< declared relative tolerance
    double z_tolerance = 0.0;    ///< declared stderr multiple
    std::string rule;            ///< "relative" or "stderr": whichever bound is looser
    bool pass = false;
};

/// Aggregate criterion, e.g. a pass fraction or a median deviation. Non-gating
/// checks are diagnostics and do not enter the verdict.
struct ComparisonCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  ///< ">=" or "<="
    bool pass = false;
    bool gating = true;
};

struct ComparisonReport {
    std::string experiment;
    std::vector<ComparisonRow> rows;
    std::vector<ComparisonCheck> checks;

    /// Global verdict: every gating check passes.
    bool pass() const;
    std::size_t failed_rows() const;

    /// Adds a row judged by `tol` (pass iff within the looser of the two bounds).
    ComparisonRow& add_row(std::string point, std::string quantity, double x, double predicted, double measured,
                           double stderr_, const Tolerances& tol);
    ComparisonCheck& add_check(std::string name, double value, double threshold, std::string relation,
                               bool gating = true);
    void append(const ComparisonReport& other);
};

/// Point-wise comparison of a scalar table; adds a gating pass-fraction check.
/// GridMismatch unless all spans have the same length.
ComparisonReport compare(std::span<const double> x, std::span<const double> measured,
                         std::span<const double> stderr_, std::span<const double> predicted,
                         const Tolerances& tol, const std::string& quantity = "value",
                         const std::string& point = "");

/// Linear spectrum against the prediction over non-excluded modes with 0 < q <= pi.
/// GridMismatch if the q grids differ.
ComparisonReport compare(const SpectrumEstimate& measured, const TheoryPrediction& predicted, const Tolerances& tol,
                         const std::string& point = "");

/// Pearson correlation of log measured vs log predicted variance over 0 < q <= pi.
double loglog_correlation(const SpectrumEstimate& measured, const TheoryPrediction& predicted);

double median(std::vector<double> v);

void write_report_json(std::ostream& os, const ComparisonReport& r);
void write_report_csv(std::ostream& os, const ComparisonReport& r);

}  // namespace netlattice

#endif
