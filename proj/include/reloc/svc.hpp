#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace reloc {

enum class Verdict { matched = 0, mismatched = 1, unmatched = 2 };

std::string verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);

struct SvcSample {
  Eigen::Vector2d x;  // (mcs, alignment ratio)
  Verdict label;
};

/// One binary SVM of the one-vs-one ensemble. Decision value
/// f(x) = sum_i coeff_i * K(sv_i, x) - bias; f > 0 votes `positive`.
struct BinarySvm {
  Verdict positive;
  Verdict negative;
  std::vector<Eigen::Vector2d> support_vectors;
  std::vector<double> coeffs;  // alpha_i * y_i
  double bias = 0.0;

  double decision(const Eigen::Vector2d& x, double gamma, double coef0,
                  int degree) const;
};

/// Multi-class SVC over (mcs, nu) with kernel K(x,z) = (gamma<x,z> + coef0)^degree.
struct SvcModel {
  double gamma = 1.0;
  double coef0 = 1.0;
  double c = 1.0;
  int degree = 5;
  std::vector<BinarySvm> classifiers;
};

/// One-vs-one training via sequential minimal optimisation, KKT tolerance
/// 1e-3. Input order never matters: samples are canonically sorted first.
/// Throws InvalidArgument when fewer than two classes are present.
SvcModel svc_train(std::vector<SvcSample> samples, double c = 1.0,
                   double gamma = 1.0, double coef0 = 1.0);

/// Majority vote over the binary classifiers; vote ties break by class
/// priority matched > mismatched > unmatched.
Verdict svc_predict(const SvcModel& model, const Eigen::Vector2d& x);

void save_svc(const std::filesystem::path& path, const SvcModel& model);
SvcModel load_svc(const std::filesystem::path& path);

}  // namespace reloc
