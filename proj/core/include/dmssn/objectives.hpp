#pragma once

#include <array>
#include <map>
#include <string>

#include "dmssn/autoencoders.hpp"

namespace dmssn {

struct HsLossOptions {
  double huber_delta = 1.0;
  double sam_eps = 1e-8;  // spectra whose norm product falls below this have no defined angle
  double huber_weight = 1.0;
  double sam_weight = 1.0;
};

struct HsTerms {
  double huber = 0.0;
  double sam = 0.0;
  double total() const { return huber + sam; }
};

/// Mean element-wise Huber loss.
Var huber_loss(const Var& x, const Var& y, double delta);
/// Mean per-pixel spectral angle (radians) over the last axis.
Var spectral_angle_loss(const Var& x, const Var& y, double eps);
/// Weighted Huber + spectral angle. `terms` receives the weighted parts.
Var hs_loss(const Var& x, const Var& y, const HsLossOptions& opts = {}, HsTerms* terms = nullptr);
double hs_loss(const Tensor& x, const Tensor& y, const HsLossOptions& opts = {});

/// Angle between two spectra in [0, pi], computed as
/// 2 atan2(|a/|a| - b/|b||, |a/|a| + b/|b||). Returns pi/2 when either norm
/// product is below `eps`.
double spectral_angle(std::span<const double> a, std::span<const double> b, double eps = 1e-8);

/// (1/HW) (||x - y||_F - sum_p arccos(|<x_p, y_p>| / (|x_p| |y_p|))).
/// Diagnostic only; it can be negative.
double mixing_distance(const Tensor& x, const Tensor& y, double eps = 1e-8);

/// The three guidance pairs: (E_T^2, E_S^1), (E_T, E_S), (D_T^2, D_S^1).
/// Teacher maps enter as constants.
Var distillation_loss(const TeacherActivations& teacher, const StudentActivations& student,
                      const HsLossOptions& opts = {}, std::array<HsTerms, 3>* terms = nullptr);

struct SodTerms {
  double bce = 0.0;
  double ssim = 0.0;  // the 1 - SSIM term
  double iou = 0.0;   // the 1 - soft IoU term
  double total() const { return bce + ssim + iou; }
};

struct SodLossOptions {
  double bce_eps = 1e-7;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_k1 = 0.01;
  double ssim_k2 = 0.03;
};

/// Inputs are H x W x 1 maps; `target` must be binary.
Var bce_loss(const Var& pred, const Tensor& target, double eps);
/// 1 - mean SSIM with a Gaussian window and zero padding.
Var ssim_loss(const Var& pred, const Tensor& target, const SodLossOptions& opts = {});
/// 1 - sum(y t) / sum(y + t - y t).
Var iou_loss(const Var& pred, const Tensor& target);
Var sod_loss(const Var& pred, const Tensor& target, const SodLossOptions& opts = {}, SodTerms* terms = nullptr);

/// Mean SSIM between two single-channel maps.
double ssim(const Tensor& a, const Tensor& b, const SodLossOptions& opts = {});

double total_loss(double recon, double sod, double dis);

struct LossReport {
  HsTerms recon;
  SodTerms sod;
  std::array<HsTerms, 3> dis_pairs{};

  double l_s() const { return recon.total(); }
  double l_sod() const { return sod.total(); }
  double l_dis() const { return dis_pairs[0].total() + dis_pairs[1].total() + dis_pairs[2].total(); }
  double total() const { return total_loss(l_s(), l_sod(), l_dis()); }

  std::map<std::string, double> components() const;
  bool all_finite() const;
};

}  // namespace dmssn
