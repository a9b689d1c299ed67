#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace latflow {

/// Working precision for lattice geometry. Flowed lattices carry entries of
/// size e^t next to cancellations of size e^-t, so the extended x87 format is
/// used for every real-valued lattice computation.
using Real = long double;

using RealMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Raised when an enumeration would exceed its configured work budget.
class BudgetExceeded : public std::runtime_error {
public:
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr std::int64_t kDefaultEnumerationBudget = 20'000'000;

/// Process-wide default for EnumerationOptions::budget; the CLI sets it from
/// the config's budget block.
inline std::atomic<std::int64_t>& enumeration_budget_default() {
    static std::atomic<std::int64_t> value{kDefaultEnumerationBudget};
    return value;
}

} // namespace latflow
