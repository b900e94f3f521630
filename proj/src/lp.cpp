#include "apf/lp.hpp"

#include <algorithm>
#include <cmath>

#include "apf/error.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index LinearProgram::add_variable(double cost, double lo, double hi) {
  const Index n = objective.size();
  if (lower.size() != n) lower = VectorXd::Constant(n, -kInf);
  if (upper.size() != n) upper = VectorXd::Constant(n, kInf);
  objective.conservativeResize(n + 1);
  lower.conservativeResize(n + 1);
  upper.conservativeResize(n + 1);
  objective[n] = cost;
  lower[n] = lo;
  upper[n] = hi;
  return n;
}

void LinearProgram::add_row(std::vector<std::pair<Index, double>> terms, Sense sense,
                            double rhs) {
  rows.push_back(Row{std::move(terms), sense, rhs});
}

void LinearProgram::add_dense_row(const VectorXd& coeffs, Sense sense, double rhs,
                                  Index offset) {
  Row row;
  row.sense = sense;
  row.rhs = rhs;
  for (Index i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i] != 0.0) row.terms.emplace_back(offset + i, coeffs[i]);
  }
  rows.push_back(std::move(row));
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "?";
}

namespace {

using SparseCol = std::vector<std::pair<int, double>>;

// min c^T z, A z = b, z >= 0, with a map back to the caller's variables.
struct StandardForm {
  struct VarMap {
    int pos = -1;
    int neg = -1;
    double offset = 0.0;
    double sign = 1.0;
  };

  int m = 0;
  std::vector<SparseCol> cols;
  std::vector<double> cost;
  VectorXd b;
  std::vector<VarMap> map;
  double cost_offset = 0.0;
  bool trivially_infeasible = false;
};

StandardForm to_standard(const LinearProgram& lp) {
  const Index n = lp.num_vars();
  const VectorXd lower = lp.lower.size() == n ? lp.lower : VectorXd::Constant(n, -LinearProgram::kInf);
  const VectorXd upper = lp.upper.size() == n ? lp.upper : VectorXd::Constant(n, LinearProgram::kInf);

  StandardForm sf;
  sf.map.resize(static_cast<size_t>(n));
  struct Entry {
    int row;
    int col;
    double val;
  };
  std::vector<Entry> entries;
  std::vector<double> rhs;
  std::vector<Sense> senses;
  int ncol = 0;

  for (const auto& row : lp.rows) {
    rhs.push_back(row.rhs);
    senses.push_back(row.sense);
  }
  const int n_rows = static_cast<int>(lp.rows.size());

  for (Index j = 0; j < n; ++j) {
    auto& vm = sf.map[static_cast<size_t>(j)];
    const double lo = lower[j];
    const double hi = upper[j];
    const double c = lp.objective[j];
    if (std::isnan(lo) || std::isnan(hi) || !std::isfinite(c)) {
      throw Error(ErrorCode::kValidation, "non-finite cost or NaN bound");
    }
    if (lo > hi) sf.trivially_infeasible = true;
    if (std::isfinite(lo)) {
      vm.pos = ncol++;
      vm.offset = lo;
      if (std::isfinite(hi)) {
        const int r = static_cast<int>(rhs.size());
        rhs.push_back(hi - lo);
        senses.push_back(Sense::kLe);
        entries.push_back({r, vm.pos, 1.0});
      }
    } else if (std::isfinite(hi)) {
      vm.pos = ncol++;
      vm.offset = hi;
      vm.sign = -1.0;
    } else {
      vm.pos = ncol++;
      vm.neg = ncol++;
    }
    sf.cost.resize(static_cast<size_t>(ncol), 0.0);
    sf.cost[static_cast<size_t>(vm.pos)] = c * vm.sign;
    if (vm.neg >= 0) sf.cost[static_cast<size_t>(vm.neg)] = -c;
    sf.cost_offset += c * vm.offset;
  }

  for (int i = 0; i < n_rows; ++i) {
    for (const auto& [j, a] : lp.rows[static_cast<size_t>(i)].terms) {
      if (j < 0 || j >= n) throw Error(ErrorCode::kDimensionMismatch, "row refers to unknown variable");
      if (!std::isfinite(a)) throw Error(ErrorCode::kValidation, "non-finite constraint coefficient");
      if (a == 0.0) continue;
      const auto& vm = sf.map[static_cast<size_t>(j)];
      entries.push_back({i, vm.pos, a * vm.sign});
      if (vm.neg >= 0) entries.push_back({i, vm.neg, -a});
      rhs[static_cast<size_t>(i)] -= a * vm.offset;
    }
    if (!std::isfinite(rhs[static_cast<size_t>(i)])) {
      throw Error(ErrorCode::kValidation, "non-finite right-hand side");
    }
  }

  sf.m = static_cast<int>(rhs.size());
  for (int i = 0; i < sf.m; ++i) {
    const Sense s = senses[static_cast<size_t>(i)];
    if (s == Sense::kEq) continue;
    entries.push_back({i, ncol++, s == Sense::kLe ? 1.0 : -1.0});
  }
  sf.cost.resize(static_cast<size_t>(ncol), 0.0);
  sf.cols.assign(static_cast<size_t>(ncol), {});
  // Entries arrive row by row, so each column comes out sorted by row;
  // repeated terms for one variable in one row are merged.
  for (const auto& e : entries) {
    auto& col = sf.cols[static_cast<size_t>(e.col)];
    if (!col.empty() && col.back().first == e.row) {
      col.back().second += e.val;
    } else {
      col.emplace_back(e.row, e.val);
    }
  }
  for (auto& col : sf.cols) {
    col.erase(std::remove_if(col.begin(), col.end(), [](const auto& p) { return p.second == 0.0; }),
              col.end());
  }
  sf.b = Eigen::Map<const VectorXd>(rhs.data(), static_cast<Index>(rhs.size()));
  return sf;
}

class Simplex {
 public:
  Simplex(StandardForm& sf, const LpOptions& opts) : sf_(sf), opts_(opts), m_(sf.m) {
    n_orig_ = static_cast<int>(sf.cols.size());
    cols_ = sf.cols;
    cost_ = sf.cost;
    is_art_.assign(cols_.size(), 0);
    const double scale = 1.0 + (m_ > 0 ? sf.b.cwiseAbs().maxCoeff() : 0.0);
    phase1_tol_ = 1e-7 * scale;
    max_iter_ = opts.max_iterations > 0 ? opts.max_iterations
                                        : 50 * (m_ + static_cast<int>(cols_.size())) + 1000;
  }

  LpResult solve() {
    LpResult res;
    crash();
    bool need_phase1 = false;
    for (char a : is_art_) need_phase1 = need_phase1 || a;
    if (need_phase1) {
      std::vector<double> c1(cols_.size(), 0.0);
      for (size_t j = 0; j < cols_.size(); ++j) c1[j] = is_art_[j] ? 1.0 : 0.0;
      run(c1, false);
      refresh();
      double infeas = 0.0;
      for (int s = 0; s < m_; ++s) {
        if (is_art_[static_cast<size_t>(basis_[static_cast<size_t>(s)])]) infeas += std::max(0.0, xb_[s]);
      }
      if (infeas > phase1_tol_) {
        res.status = LpStatus::kInfeasible;
        res.iterations = iterations_;
        return res;
      }
      drive_out_artificials();
    }
    std::vector<double> c2(cols_.size(), 0.0);
    for (int j = 0; j < n_orig_; ++j) c2[static_cast<size_t>(j)] = cost_[static_cast<size_t>(j)];
    const bool bounded = run(c2, true);
    res.iterations = iterations_;
    if (!bounded) {
      res.status = LpStatus::kUnbounded;
      return res;
    }
    refresh();
    std::vector<double> z(static_cast<size_t>(n_orig_), 0.0);
    for (int s = 0; s < m_; ++s) {
      const int c = basis_[static_cast<size_t>(s)];
      if (c < n_orig_) z[static_cast<size_t>(c)] = std::max(0.0, xb_[s]);
    }
    const Index n = static_cast<Index>(sf_.map.size());
    res.x.resize(n);
    for (Index j = 0; j < n; ++j) {
      const auto& vm = sf_.map[static_cast<size_t>(j)];
      double v = vm.offset + vm.sign * z[static_cast<size_t>(vm.pos)];
      if (vm.neg >= 0) v -= z[static_cast<size_t>(vm.neg)];
      res.x[j] = v;
    }
    res.status = LpStatus::kOptimal;
    return res;
  }

 private:
  int add_column(SparseCol col, bool artificial) {
    cols_.push_back(std::move(col));
    is_art_.push_back(artificial ? 1 : 0);
    return static_cast<int>(cols_.size()) - 1;
  }

  // Starting basis from singleton columns, one per row. Rows without one
  // get an artificial; rows whose singleton would be negative are repaired
  // by a single composite artificial.
  void crash() {
    basis_.assign(static_cast<size_t>(m_), -1);
    std::vector<double> unit(static_cast<size_t>(m_), 0.0);
    std::vector<int> best(static_cast<size_t>(m_), -1);
    std::vector<int> best_ok(static_cast<size_t>(m_), 0);
    for (int j = 0; j < n_orig_; ++j) {
      const auto& col = cols_[static_cast<size_t>(j)];
      if (col.size() != 1) continue;
      const int r = col[0].first;
      const double v = col[0].second;
      const bool ok = sf_.b[r] == 0.0 || (sf_.b[r] > 0.0) == (v > 0.0);
      const auto ri = static_cast<size_t>(r);
      const bool better = best[ri] < 0 || (ok && !best_ok[ri]) ||
                          (ok == static_cast<bool>(best_ok[ri]) && std::abs(v) > std::abs(unit[ri]));
      if (better) {
        best[ri] = j;
        best_ok[ri] = ok;
        unit[ri] = v;
      }
    }
    std::vector<int> negative_rows;
    for (int i = 0; i < m_; ++i) {
      const auto ii = static_cast<size_t>(i);
      if (best[ii] >= 0) {
        basis_[ii] = best[ii];
        if (sf_.b[i] / unit[ii] < 0.0) negative_rows.push_back(i);
      } else {
        const double sgn = sf_.b[i] >= 0.0 ? 1.0 : -1.0;
        basis_[ii] = add_column({{i, sgn}}, true);
        unit[ii] = sgn;
      }
    }
    if (!negative_rows.empty()) {
      SparseCol alpha;
      int worst = negative_rows.front();
      for (int i : negative_rows) {
        alpha.emplace_back(i, -unit[static_cast<size_t>(i)]);
        if (sf_.b[i] / unit[static_cast<size_t>(i)] <
            sf_.b[worst] / unit[static_cast<size_t>(worst)]) {
          worst = i;
        }
      }
      basis_[static_cast<size_t>(worst)] = add_column(std::move(alpha), true);
    }
    in_basis_.assign(cols_.size(), -1);
    for (int s = 0; s < m_; ++s) in_basis_[static_cast<size_t>(basis_[static_cast<size_t>(s)])] = s;
  }

  // Basis split into singleton columns that cover distinct rows and a small
  // dense kernel for the rest.
  void factor() {
    unit_row_.assign(static_cast<size_t>(m_), -1);
    unit_val_.assign(static_cast<size_t>(m_), 0.0);
    std::vector<char> taken(static_cast<size_t>(m_), 0);
    for (int s = 0; s < m_; ++s) {
      const auto& col = cols_[static_cast<size_t>(basis_[static_cast<size_t>(s)])];
      if (col.size() != 1) continue;
      const int r = col[0].first;
      if (taken[static_cast<size_t>(r)]) continue;
      taken[static_cast<size_t>(r)] = 1;
      unit_row_[static_cast<size_t>(s)] = r;
      unit_val_[static_cast<size_t>(s)] = col[0].second;
    }
    kslots_.clear();
    krows_.clear();
    krow_index_.assign(static_cast<size_t>(m_), -1);
    for (int s = 0; s < m_; ++s) {
      if (unit_row_[static_cast<size_t>(s)] < 0) kslots_.push_back(s);
    }
    for (int r = 0; r < m_; ++r) {
      if (!taken[static_cast<size_t>(r)]) {
        krow_index_[static_cast<size_t>(r)] = static_cast<int>(krows_.size());
        krows_.push_back(r);
      }
    }
    const auto k = static_cast<Index>(kslots_.size());
    if (k == 0) return;
    MatrixXd kernel = MatrixXd::Zero(k, k);
    for (Index q = 0; q < k; ++q) {
      for (const auto& [r, v] : cols_[static_cast<size_t>(basis_[static_cast<size_t>(kslots_[static_cast<size_t>(q)])])]) {
        const int ki = krow_index_[static_cast<size_t>(r)];
        if (ki >= 0) kernel(ki, q) = v;
      }
    }
    klu_.compute(kernel);
    const double piv = klu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(piv > 1e-12 * std::max(1.0, kernel.cwiseAbs().maxCoeff()))) {
      throw Error(ErrorCode::kNumericalFailure, "simplex basis became singular");
    }
  }

  // Solves B z = r; z is indexed by basis slot.
  VectorXd ftran(const VectorXd& r) const {
    VectorXd z(m_);
    VectorXd tmp = r;
    const auto k = static_cast<Index>(kslots_.size());
    if (k > 0) {
      VectorXd rk(k);
      for (Index q = 0; q < k; ++q) rk[q] = r[krows_[static_cast<size_t>(q)]];
      const VectorXd zk = klu_.solve(rk);
      for (Index q = 0; q < k; ++q) {
        const int s = kslots_[static_cast<size_t>(q)];
        z[s] = zk[q];
        for (const auto& [row, v] : cols_[static_cast<size_t>(basis_[static_cast<size_t>(s)])]) {
          tmp[row] -= v * zk[q];
        }
      }
    }
    for (int s = 0; s < m_; ++s) {
      const int row = unit_row_[static_cast<size_t>(s)];
      if (row >= 0) z[s] = tmp[row] / unit_val_[static_cast<size_t>(s)];
    }
    return z;
  }

  // Solves B^T y = c; c is indexed by slot, y by row.
  VectorXd btran(const VectorXd& c) const {
    VectorXd y = VectorXd::Zero(m_);
    for (int s = 0; s < m_; ++s) {
      const int row = unit_row_[static_cast<size_t>(s)];
      if (row >= 0) y[row] = c[s] / unit_val_[static_cast<size_t>(s)];
    }
    const auto k = static_cast<Index>(kslots_.size());
    if (k > 0) {
      VectorXd ck(k);
      for (Index q = 0; q < k; ++q) {
        const int s = kslots_[static_cast<size_t>(q)];
        double v = c[s];
        for (const auto& [row, a] : cols_[static_cast<size_t>(basis_[static_cast<size_t>(s)])]) {
          if (krow_index_[static_cast<size_t>(row)] < 0) v -= a * y[row];
        }
        ck[q] = v;
      }
      const VectorXd yk = klu_.transpose().solve(ck);
      for (Index q = 0; q < k; ++q) y[krows_[static_cast<size_t>(q)]] = yk[q];
    }
    return y;
  }

  VectorXd dense_column(int j) const {
    VectorXd a = VectorXd::Zero(m_);
    for (const auto& [r, v] : cols_[static_cast<size_t>(j)]) a[r] = v;
    return a;
  }

  void refresh() {
    factor();
    xb_ = ftran(sf_.b);
  }

  void pivot(int slot, int entering) {
    in_basis_[static_cast<size_t>(basis_[static_cast<size_t>(slot)])] = -1;
    basis_[static_cast<size_t>(slot)] = entering;
    in_basis_[static_cast<size_t>(entering)] = slot;
  }

  // Returns false when the objective is unbounded below.
  bool run(const std::vector<double>& cost, bool bar_artificials) {
    bool bland = false;
    int stalled = 0;
    for (;;) {
      refresh();
      VectorXd cb(m_);
      for (int s = 0; s < m_; ++s) cb[s] = cost[static_cast<size_t>(basis_[static_cast<size_t>(s)])];
      const VectorXd y = btran(cb);

      int entering = -1;
      double best = -opts_.optimality_tol;
      for (size_t j = 0; j < cols_.size(); ++j) {
        if (in_basis_[j] >= 0 || (bar_artificials && is_art_[j])) continue;
        double d = cost[j];
        for (const auto& [r, v] : cols_[j]) d -= v * y[r];
        if (d < best) {
          entering = static_cast<int>(j);
          if (bland) break;
          best = d;
        }
      }
      if (entering < 0) return true;

      const VectorXd w = ftran(dense_column(entering));
      int leave = -1;
      double ratio = 0.0;
      for (int s = 0; s < m_; ++s) {
        if (w[s] <= kPivotTol) continue;
        const double r = std::max(0.0, xb_[s]) / w[s];
        if (leave < 0 || r < ratio - 1e-12) {
          leave = s;
          ratio = r;
        } else if (r <= ratio + 1e-12) {
          const bool take = bland ? basis_[static_cast<size_t>(s)] < basis_[static_cast<size_t>(leave)]
                                  : w[s] > w[leave];
          if (take) {
            leave = s;
            ratio = std::min(ratio, r);
          }
        }
      }
      if (leave < 0) return false;

      if (ratio <= 1e-12) {
        if (++stalled > 50) bland = true;
      } else {
        stalled = 0;
        bland = false;
      }
      pivot(leave, entering);
      if (++iterations_ > max_iter_) {
        throw Error(ErrorCode::kNumericalFailure, "simplex iteration limit reached");
      }
    }
  }

  // Replaces zero-level artificials in the basis by structural columns where
  // possible; the rest sit on redundant rows.
  void drive_out_artificials() {
    for (int s = 0; s < m_; ++s) {
      if (!is_art_[static_cast<size_t>(basis_[static_cast<size_t>(s)])]) continue;
      factor();
      VectorXd e = VectorXd::Zero(m_);
      e[s] = 1.0;
      const VectorXd rho = btran(e);
      int pick = -1;
      double mag = 1e-7;
      for (size_t j = 0; j < cols_.size(); ++j) {
        if (in_basis_[j] >= 0 || is_art_[j]) continue;
        double a = 0.0;
        for (const auto& [r, v] : cols_[j]) a += v * rho[r];
        if (std::abs(a) > mag) {
          mag = std::abs(a);
          pick = static_cast<int>(j);
        }
      }
      if (pick >= 0) pivot(s, pick);
    }
  }

  static constexpr double kPivotTol = 1e-9;

  StandardForm& sf_;
  LpOptions opts_;
  int m_;
  int n_orig_ = 0;
  std::vector<SparseCol> cols_;
  std::vector<double> cost_;
  std::vector<char> is_art_;
  std::vector<int> basis_;
  std::vector<int> in_basis_;
  VectorXd xb_;
  double phase1_tol_ = 1e-7;
  int max_iter_ = 0;
  int iterations_ = 0;

  std::vector<int> unit_row_;
  std::vector<double> unit_val_;
  std::vector<int> kslots_;
  std::vector<int> krows_;
  std::vector<int> krow_index_;
  Eigen::PartialPivLU<MatrixXd> klu_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  StandardForm sf = to_standard(lp);
  if (sf.trivially_infeasible) return LpResult{};
  Simplex simplex(sf, opts);
  LpResult res = simplex.solve();
  if (res.status == LpStatus::kOptimal) res.value = lp.objective.dot(res.x);
  return res;
}

double max_violation(const LinearProgram& lp, const VectorXd& x) {
  double worst = 0.0;
  for (const auto& row : lp.rows) {
    double lhs = 0.0;
    for (const auto& [j, a] : row.terms) lhs += a * x[j];
    const double r = lhs - row.rhs;
    switch (row.sense) {
      case Sense::kLe: worst = std::max(worst, r); break;
      case Sense::kGe: worst = std::max(worst, -r); break;
      case Sense::kEq: worst = std::max(worst, std::abs(r)); break;
    }
  }
  for (Index j = 0; j < x.size(); ++j) {
    if (j < lp.lower.size()) worst = std::max(worst, lp.lower[j] - x[j]);
    if (j < lp.upper.size()) worst = std::max(worst, x[j] - lp.upper[j]);
  }
  return worst;
}

}  // namespace apf
