#include "reloc/svc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "reloc/errors.hpp"
#include "reloc/io.hpp"

namespace reloc {

namespace {

constexpr double kKktTol = 1e-3;
constexpr double kStepEps = 1e-12;

double poly_kernel(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   double gamma, double coef0, int degree) {
  return std::pow(gamma * a.dot(b) + coef0, degree);
}

/// Platt-style SMO on one binary subproblem. Deterministic: the second
/// choice heuristics scan from index 0 instead of a random start.
class SmoSolver {
 public:
  SmoSolver(const std::vector<Eigen::Vector2d>& x, const std::vector<int>& y,
            double c, double gamma, double coef0, int degree)
      : x_(x), y_(y), c_(c) {
    const int n = static_cast<int>(x.size());
    kernel_.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        kernel_(i, j) = kernel_(j, i) =
            poly_kernel(x[i], x[j], gamma, coef0, degree);
    alpha_.assign(n, 0.0);
    // f(x_i) = 0 initially, so E_i = -y_i.
    error_.resize(n);
    for (int i = 0; i < n; ++i) error_[i] = -static_cast<double>(y[i]);
  }

  void solve() {
    const int n = static_cast<int>(x_.size());
    bool examine_all = true;
    int changed = 0;
    int guard = 0;
    do {
      changed = 0;
      for (int i = 0; i < n; ++i)
        if (examine_all || is_free(i)) changed += examine(i);
      if (examine_all)
        examine_all = false;
      else if (changed == 0)
        examine_all = true;
      if (++guard > 100000)
        throw Error("svc: optimisation failed to settle");
    } while (changed > 0 || examine_all);
  }

  const std::vector<double>& alpha() const { return alpha_; }
  double bias() const { return b_; }

 private:
  bool is_free(int i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  int examine(int i2) {
    const double y2 = y_[i2];
    const double e2 = error_[i2];
    const double r2 = e2 * y2;
    const bool violates = (r2 < -kKktTol && alpha_[i2] < c_) ||
                          (r2 > kKktTol && alpha_[i2] > 0.0);
    if (!violates) return 0;

    const int n = static_cast<int>(x_.size());
    int best = -1;
    double best_gap = -1.0;
    for (int i = 0; i < n; ++i) {
      if (!is_free(i)) continue;
      const double gap = std::abs(error_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best >= 0 && step(best, i2)) return 1;
    for (int i = 0; i < n; ++i)
      if (is_free(i) && step(i, i2)) return 1;
    for (int i = 0; i < n; ++i)
      if (step(i, i2)) return 1;
    return 0;
  }

  bool step(int i1, int i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = error_[i1], e2 = error_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    const double k11 = kernel_(i1, i1);
    const double k12 = kernel_(i1, i2);
    const double k22 = kernel_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    double a2_new;
    if (eta > 0.0) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Objective at interval endpoints; keep the smaller.
      const double f1 = y1 * (e1 + b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double lo_obj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 +
                            0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double hi_obj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 +
                            0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (lo_obj < hi_obj - kStepEps)
        a2_new = lo;
      else if (lo_obj > hi_obj + kStepEps)
        a2_new = hi;
      else
        a2_new = a2;
    }
    if (std::abs(a2_new - a2) < kStepEps * (a2_new + a2 + kStepEps))
      return false;

    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < 0.0) {
      a2_new += s * a1_new;
      a1_new = 0.0;
    } else if (a1_new > c_) {
      a2_new += s * (a1_new - c_);
      a1_new = c_;
    }

    const double d1 = y1 * (a1_new - a1);
    const double d2 = y2 * (a2_new - a2);
    const double b1 = e1 + d1 * k11 + d2 * k12 + b_;
    const double b2 = e2 + d1 * k12 + d2 * k22 + b_;
    double b_new;
    if (a1_new > 0.0 && a1_new < c_)
      b_new = b1;
    else if (a2_new > 0.0 && a2_new < c_)
      b_new = b2;
    else
      b_new = 0.5 * (b1 + b2);

    const int n = static_cast<int>(x_.size());
    for (int i = 0; i < n; ++i)
      error_[i] += d1 * kernel_(i1, i) + d2 * kernel_(i2, i) - (b_new - b_);
    b_ = b_new;
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    return true;
  }

  const std::vector<Eigen::Vector2d>& x_;
  const std::vector<int>& y_;
  double c_;
  Eigen::MatrixXd kernel_;
  std::vector<double> alpha_;
  std::vector<double> error_;
  double b_ = 0.0;
};

int parse_int(const std::string& token, long line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError::at_line("svc model: bad integer '" + token + "'", line);
  }
}

bool sample_before(const SvcSample& a, const SvcSample& b) {
  if (a.x.x() != b.x.x()) return a.x.x() < b.x.x();
  if (a.x.y() != b.x.y()) return a.x.y() < b.x.y();
  return static_cast<int>(a.label) < static_cast<int>(b.label);
}

}  // namespace

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::matched: return "matched";
    case Verdict::mismatched: return "mismatched";
    case Verdict::unmatched: return "unmatched";
  }
  throw InvalidArgument("unknown verdict value");
}

Verdict verdict_from_name(const std::string& name) {
  if (name == "matched") return Verdict::matched;
  if (name == "mismatched") return Verdict::mismatched;
  if (name == "unmatched") return Verdict::unmatched;
  throw InvalidArgument("unknown verdict name '" + name + "'");
}

double BinarySvm::decision(const Eigen::Vector2d& x, double gamma,
                           double coef0, int degree) const {
  double f = -bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i)
    f += coeffs[i] * poly_kernel(support_vectors[i], x, gamma, coef0, degree);
  return f;
}

SvcModel svc_train(std::vector<SvcSample> samples, double c, double gamma,
                   double coef0) {
  if (!(c > 0.0)) throw InvalidArgument("svc: C must be positive");
  for (const auto& s : samples)
    if (!s.x.allFinite())
      throw InvalidArgument("svc: non-finite training sample");

  std::sort(samples.begin(), samples.end(), sample_before);

  bool present[3] = {false, false, false};
  for (const auto& s : samples) present[static_cast<int>(s.label)] = true;
  const int class_count = present[0] + present[1] + present[2];
  if (class_count < 2)
    throw InvalidArgument("svc: training needs at least two classes");

  SvcModel model;
  model.gamma = gamma;
  model.coef0 = coef0;
  model.c = c;
  model.degree = 5;

  for (int pos = 0; pos < 3; ++pos) {
    for (int neg = pos + 1; neg < 3; ++neg) {
      if (!present[pos] || !present[neg]) continue;
      std::vector<Eigen::Vector2d> x;
      std::vector<int> y;
      for (const auto& s : samples) {
        if (static_cast<int>(s.label) == pos) {
          x.push_back(s.x);
          y.push_back(1);
        } else if (static_cast<int>(s.label) == neg) {
          x.push_back(s.x);
          y.push_back(-1);
        }
      }
      SmoSolver solver(x, y, c, gamma, coef0, model.degree);
      solver.solve();

      BinarySvm svm;
      svm.positive = static_cast<Verdict>(pos);
      svm.negative = static_cast<Verdict>(neg);
      svm.bias = solver.bias();
      for (std::size_t i = 0; i < x.size(); ++i)
        if (solver.alpha()[i] > kStepEps) {
          svm.support_vectors.push_back(x[i]);
          svm.coeffs.push_back(solver.alpha()[i] * y[i]);
        }
      model.classifiers.push_back(std::move(svm));
    }
  }
  return model;
}

Verdict svc_predict(const SvcModel& model, const Eigen::Vector2d& x) {
  if (model.classifiers.empty())
    throw InvalidArgument("svc: model has no classifiers");
  int votes[3] = {0, 0, 0};
  for (const auto& svm : model.classifiers) {
    const double f = svm.decision(x, model.gamma, model.coef0, model.degree);
    const Verdict winner = f > 0.0 ? svm.positive : svm.negative;
    ++votes[static_cast<int>(winner)];
  }
  int best = 0;
  for (int v = 1; v < 3; ++v)
    if (votes[v] > votes[best]) best = v;
  return static_cast<Verdict>(best);
}

void save_svc(const std::filesystem::path& path, const SvcModel& model) {
  std::ostringstream out;
  out << "svc 1\n";
  out << "kernel " << model.degree << " " << to_hex(model.gamma) << " "
      << to_hex(model.coef0) << " " << to_hex(model.c) << "\n";
  out << "classifiers " << model.classifiers.size() << "\n";
  for (const auto& svm : model.classifiers) {
    out << "classifier " << verdict_name(svm.positive) << " "
        << verdict_name(svm.negative) << " " << svm.support_vectors.size()
        << " " << to_hex(svm.bias) << "\n";
    for (std::size_t i = 0; i < svm.support_vectors.size(); ++i)
      out << "sv " << to_hex(svm.coeffs[i]) << " "
          << to_hex(svm.support_vectors[i].x()) << " "
          << to_hex(svm.support_vectors[i].y()) << "\n";
  }
  write_text_file(path, out.str());
}

SvcModel load_svc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open svc model " + path.string(), 0);
  std::string line;
  long line_no = 0;
  auto next_tokens = [&](const char* what) {
    while (std::getline(in, line)) {
      ++line_no;
      auto tokens = split_tokens(line);
      if (!tokens.empty()) return tokens;
    }
    throw FormatError::at_line(std::string("svc model: missing ") + what,
                               line_no);
  };

  auto header = next_tokens("header");
  if (header.size() != 2 || header[0] != "svc" || header[1] != "1")
    throw FormatError::at_line("svc model: bad header", line_no);

  auto kernel = next_tokens("kernel line");
  if (kernel.size() != 5 || kernel[0] != "kernel")
    throw FormatError::at_line("svc model: bad kernel line", line_no);
  SvcModel model;
  model.degree = parse_int(kernel[1], line_no);
  model.gamma = from_hex(kernel[2], line_no);
  model.coef0 = from_hex(kernel[3], line_no);
  model.c = from_hex(kernel[4], line_no);
  if (model.degree < 1)
    throw FormatError::at_line("svc model: bad kernel degree", line_no);

  auto count_line = next_tokens("classifier count");
  if (count_line.size() != 2 || count_line[0] != "classifiers")
    throw FormatError::at_line("svc model: bad classifier count line", line_no);
  const int count = parse_int(count_line[1], line_no);
  if (count < 1 || count > 3)
    throw FormatError::at_line("svc model: classifier count out of range",
                               line_no);

  for (int ci = 0; ci < count; ++ci) {
    auto head = next_tokens("classifier header");
    if (head.size() != 5 || head[0] != "classifier")
      throw FormatError::at_line("svc model: bad classifier header", line_no);
    BinarySvm svm;
    svm.positive = verdict_from_name(head[1]);
    svm.negative = verdict_from_name(head[2]);
    const int sv_count = parse_int(head[3], line_no);
    svm.bias = from_hex(head[4], line_no);
    if (sv_count < 1)
      throw FormatError::at_line("svc model: classifier without support "
                                 "vectors", line_no);
    for (int si = 0; si < sv_count; ++si) {
      auto sv = next_tokens("support vector");
      if (sv.size() != 4 || sv[0] != "sv")
        throw FormatError::at_line("svc model: bad support vector line",
                                   line_no);
      svm.coeffs.push_back(from_hex(sv[1], line_no));
      svm.support_vectors.emplace_back(from_hex(sv[2], line_no),
                                       from_hex(sv[3], line_no));
    }
    model.classifiers.push_back(std::move(svm));
  }
  return model;
}

}  // namespace reloc
