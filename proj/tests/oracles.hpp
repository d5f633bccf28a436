#pragma once
// Straight-line reference implementations used as test oracles. They work on
// plain row-major vectors and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// a: m x k, b: k x n.
inline Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
      out[i * n + j] = s;
    }
  return out;
}

inline Vec softmax(const Vec& v) {
  const double m = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += out[i] = std::exp(v[i] - m);
  for (double& x : out) x /= z;
  return out;
}

inline Vec masked_softmax(const Vec& v, const std::vector<std::uint8_t>& mask) {
  double m = -INFINITY;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) m = std::max(m, v[i]);
  Vec out(v.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) z += out[i] = std::exp(v[i] - m);
  for (double& x : out) x /= z;
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmOut {
  Vec h, c;
};

// Gate order i, f, o, g; w_x is in x 4h, w_h is h x 4h (row-major).
inline LstmOut lstm_cell(const Vec& x, const Vec& h, const Vec& c, const Vec& w_x, const Vec& w_h,
                         const Vec& b) {
  const std::size_t in = x.size();
  const std::size_t hid = h.size();
  auto pre = [&](std::size_t gate, std::size_t j) {
    const std::size_t col = gate * hid + j;
    double s = b[col];
    for (std::size_t t = 0; t < in; ++t) s += x[t] * w_x[t * 4 * hid + col];
    for (std::size_t t = 0; t < hid; ++t) s += h[t] * w_h[t * 4 * hid + col];
    return s;
  };
  LstmOut out{Vec(hid), Vec(hid)};
  for (std::size_t j = 0; j < hid; ++j) {
    const double i = sigmoid(pre(0, j));
    const double f = sigmoid(pre(1, j));
    const double o = sigmoid(pre(2, j));
    const double g = std::tanh(pre(3, j));
    out.c[j] = f * c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

// Same-padded 1-d convolution by sliding window. x: n x in, w: (k*in) x out
// where row block j weighs input offset j - (k-1)/2.
inline Vec conv_same(const Vec& x, std::size_t n, std::size_t in, std::size_t k, const Vec& w,
                     const Vec& b, std::size_t out) {
  const auto left = static_cast<long>((k - 1) / 2);
  Vec y(n * out);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < k; ++j) {
        const long src = static_cast<long>(i) + static_cast<long>(j) - left;
        if (src < 0 || src >= static_cast<long>(n)) continue;
        for (std::size_t ch = 0; ch < in; ++ch) {
          s += x[static_cast<std::size_t>(src) * in + ch] * w[(j * in + ch) * out + o];
        }
      }
      y[i * out + o] = s;
    }
  return y;
}

struct Attention {
  Vec features;  // n x a
  Vec alpha;     // n
};

// h_i = [e_i; e_a] W_e (W_e is 2d x a); u_i = v . tanh(h_i + b); alpha = softmax over mask.
inline Attention attention(const Vec& e, std::size_t n, std::size_t d, const Vec& e_a, const Vec& w_e,
                           const Vec& b_u, const Vec& v_u, const std::vector<std::uint8_t>& mask) {
  const std::size_t a = b_u.size();
  Attention out{Vec(n * a), Vec()};
  Vec u(n);
  for (std::size_t i = 0; i < n; ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < a; ++j) {
      double h = 0.0;
      for (std::size_t t = 0; t < d; ++t) h += e[i * d + t] * w_e[t * a + j];
      for (std::size_t t = 0; t < d; ++t) h += e_a[t] * w_e[(d + t) * a + j];
      out.features[i * a + j] = h;
      score += v_u[j] * std::tanh(h + b_u[j]);
    }
    u[i] = score;
  }
  out.alpha = masked_softmax(u, mask);
  return out;
}

// sum_i w_i H_i for H n x m.
inline Vec pool(const Vec& h, std::size_t n, std::size_t m, const Vec& w) {
  Vec r(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) r[j] += w[i] * h[i * m + j];
  return r;
}

struct OpinionAttention {
  Vec p, r;
};

// p = softmax over mask of Y w_trans (Y n x 3); r = H^T p.
inline OpinionAttention aowe2alsc(const Vec& y, std::size_t n, const Vec& w_trans, const Vec& h,
                                  std::size_t m, const std::vector<std::uint8_t>& mask) {
  Vec s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = y[i * 3] * w_trans[0] + y[i * 3 + 1] * w_trans[1] + y[i * 3 + 2] * w_trans[2];
  OpinionAttention out;
  out.p = masked_softmax(s, mask);
  out.r = pool(h, n, m, out.p);
  return out;
}

inline double alsc_loss(const Vec& probs, std::size_t gold) { return -std::log(probs[gold]); }

inline double aowe_loss(const Vec& probs, const std::vector<std::size_t>& gold,
                        const std::vector<std::uint8_t>& mask) {
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < 3; ++j)
      if (gold[i] == j) total -= std::log(probs[i * 3 + j]);
  }
  return total;
}

// BIO decoding where an I with no open span starts one. Tags 0=O, 1=B, 2=I.
inline std::vector<std::pair<std::size_t, std::size_t>> bio_spans(const std::vector<int>& tags) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == 2) ++j;
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

// Exact-match counts by brute force over span sets.
struct Counts {
  std::size_t tp = 0, predicted = 0, gold = 0;
};

template <typename Span>
Counts span_counts(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred) {
  Counts c;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::set<std::pair<std::size_t, std::size_t>> g, p;
    for (const auto& x : gold[s]) g.insert({x.start, x.end});
    for (const auto& x : pred[s]) p.insert({x.start, x.end});
    for (const auto& x : g)
      for (const auto& y : p)
        if (x == y) ++c.tp;
    c.gold += g.size();
    c.predicted += p.size();
  }
  return c;
}

// Confusion matrix C[gold][pred]; per-class F1 = 2 C[c][c] / (row_c + col_c).
inline double macro_f1(const std::vector<int>& gold, const std::vector<int>& pred, int classes = 3) {
  std::vector<std::vector<std::size_t>> cm(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm[gold[i]][pred[i]];
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    std::size_t row = 0, col = 0;
    for (int k = 0; k < classes; ++k) {
      row += cm[c][k];
      col += cm[k][c];
    }
    if (cm[c][c] > 0) total += static_cast<double>(2 * cm[c][c]) / static_cast<double>(row + col);
  }
  return total / classes;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
