#include "carma/karma.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace carma {

void KarmaGrid::validate() const {
  if (k_max < 0) throw std::invalid_argument("KarmaGrid: k_max must be >= 0");
  if (k_bar < 0.0) throw std::invalid_argument("KarmaGrid: k_bar must be >= 0");
  if (static_cast<double>(k_max) < k_bar)
    throw std::invalid_argument("KarmaGrid: k_max must be >= k_bar");
}

double ActionMass::total() const {
  double s = 0.0;
  for (double v : m) s += v;
  return s;
}

int threshold_bid(const ActionMass& nu, int t, double cap_frac) {
  double tail = 0.0;
  for (int b = nu.n_b - 1; b >= 0; --b) {
    tail += nu.at(t, b);
    if (tail >= cap_frac) return b;
  }
  return 0;
}

double outcome_prob_exact(const ActionMass& nu, int t, int b, double cap_frac) {
  const int bs = threshold_bid(nu, t, cap_frac);
  if (b > bs) return 1.0;
  if (b < bs) return 0.0;
  const double atom = nu.at(t, bs);
  if (atom <= 0.0) return 1.0;  // vacuous tie
  double tail_above = 0.0;
  for (int bb = bs + 1; bb < nu.n_b; ++bb) tail_above += nu.at(t, bb);
  return std::clamp((cap_frac - tail_above) / atom, 0.0, 1.0);
}

double outcome_prob_smooth(const ActionMass& nu, int t, int b, double cap_frac, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("outcome_prob_smooth: epsilon must be > 0");
  double tail_above = 0.0;
  for (int bb = b + 1; bb < nu.n_b; ++bb) tail_above += nu.at(t, bb);
  const double atom = nu.at(t, b);
  if (tail_above >= cap_frac) return 0.0;
  if (tail_above <= cap_frac - atom - epsilon) return 1.0;
  return std::clamp((cap_frac - tail_above) / (atom + epsilon), 0.0, 1.0);
}

double payment(int b, bool fast) {
  if (b < 0) throw std::invalid_argument("payment: bid must be >= 0");
  return fast ? static_cast<double>(b) : 0.0;
}

AveragePayment average_payment(const ActionMass& nu, const std::vector<double>& psi_fast) {
  AveragePayment out;
  double p = 0.0;
  for (int t = 0; t < nu.n_t; ++t)
    for (int b = 0; b < nu.n_b; ++b)
      p += nu.at(t, b) * psi_fast[static_cast<std::size_t>(t) * nu.n_b + b] * b;
  out.p_bar = p;
  out.frac_ceil = p - std::floor(p);
  return out;
}

KarmaTransition karma_transition(int k, int b, double psi_fast, double p_bar, double frac_ceil,
                                 const KarmaGrid& grid) {
  if (b < 0 || b > k) throw std::invalid_argument("karma_transition: bid must satisfy 0 <= b <= k");
  const int lo = static_cast<int>(std::floor(p_bar));
  const int hi = static_cast<int>(std::ceil(p_bar));
  const double f = frac_ceil;
  // The last weight closes the left-to-right partial sum so the four weights
  // add up to exactly 1.
  const double w_fast_hi = psi_fast * f;
  const double w_fast_lo = psi_fast - w_fast_hi;
  const double w_slow_hi = (1.0 - psi_fast) * f;
  const double partial = (w_fast_hi + w_fast_lo) + w_slow_hi;
  const double w_slow_lo = std::max(0.0, 1.0 - partial);

  KarmaTransition tr;
  auto push = [&tr, &grid](int k_next, double prob) {
    int clamped = std::min(k_next, grid.k_max);
    if (clamped != k_next) tr.clamped += prob;
    tr.k_next[tr.n] = clamped;
    tr.prob[tr.n] = prob;
    ++tr.n;
  };
  push(k - b + hi, w_fast_hi);
  push(k - b + lo, w_fast_lo);
  push(k + hi, w_slow_hi);
  push(k + lo, w_slow_lo);
  return tr;
}

AllocationOutcome allocate(const ActionMass& nu, double cap_frac, double epsilon) {
  AllocationOutcome out;
  out.epsilon = std::max(epsilon, 0.0);
  out.b_star.resize(nu.n_t);
  out.psi.assign(nu.m.size(), 0.0);
  for (int t = 0; t < nu.n_t; ++t) {
    out.b_star[t] = threshold_bid(nu, t, cap_frac);
    if (epsilon > 0.0) {
      // Shared tail accumulation across bids of one interval.
      double tail_above = 0.0;
      for (int b = nu.n_b - 1; b >= 0; --b) {
        const double atom = nu.at(t, b);
        double psi;
        if (tail_above >= cap_frac)
          psi = 0.0;
        else if (tail_above <= cap_frac - atom - epsilon)
          psi = 1.0;
        else
          psi = std::clamp((cap_frac - tail_above) / (atom + epsilon), 0.0, 1.0);
        out.psi[static_cast<std::size_t>(t) * nu.n_b + b] = psi;
        tail_above += atom;
      }
    } else {
      const int bs = out.b_star[t];
      double tail_above = 0.0;
      for (int b = nu.n_b - 1; b > bs; --b) {
        out.psi[static_cast<std::size_t>(t) * nu.n_b + b] = 1.0;
        tail_above += nu.at(t, b);
      }
      const double atom = nu.at(t, bs);
      out.psi[static_cast<std::size_t>(t) * nu.n_b + bs] =
          atom > 0.0 ? std::clamp((cap_frac - tail_above) / atom, 0.0, 1.0) : 1.0;
    }
  }
  const AveragePayment ap = average_payment(nu, out.psi);
  out.avg_payment = ap.p_bar;
  out.frac_ceil = ap.frac_ceil;
  return out;
}

}  // namespace carma
