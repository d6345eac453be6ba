// Verification backend: within-class covariance normalization, LDA,
// Gaussian PLDA trained by EM, log-likelihood-ratio scoring, and equal
// error rate computation.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fusebio/common.hpp"

namespace fusebio {

enum class TransformKind { kWccn, kLda };

struct LinearTransform {
  Eigen::MatrixXd matrix;  // out_dim x in_dim
  Eigen::VectorXd mean;    // in_dim, subtracted before projection
  TransformKind kind = TransformKind::kWccn;
  bool clipped = false;  // LDA output dimension was reduced to rank

  Eigen::Index in_dim() const { return matrix.cols(); }
  Eigen::Index out_dim() const { return matrix.rows(); }
};

// B with B^T B = W^{-1} where W is the average per-class covariance plus
// lambda I, lambda = 1e-6 trace(W)/D. Needs >= 2 classes with >= 2 vectors.
LinearTransform fit_wccn(const std::vector<Eigen::VectorXd>& vectors,
                         const std::vector<int>& labels);

// Top eigenvectors of the whitened Sw^{-1} Sb problem; the effective output
// dimension is min(requested, C-1, D) with a warning when clipped.
LinearTransform fit_lda(const std::vector<Eigen::VectorXd>& vectors,
                        const std::vector<int>& labels, int out_dim);

// matrix * (v - mean)
Eigen::VectorXd apply_transform(const LinearTransform& t, const Eigen::VectorXd& v);

Eigen::VectorXd length_normalize(const Eigen::VectorXd& v);

struct PldaModel {
  Eigen::VectorXd mu;     // D
  Eigen::MatrixXd f;      // D x q speaker subspace
  Eigen::MatrixXd sigma;  // D x D residual covariance
  int iterations_run = 0;
  std::vector<double> log_likelihood;  // observed-data value per EM iteration

  Eigen::Index dim() const { return mu.size(); }
  Eigen::Index latent_dim() const { return f.cols(); }
};

// EM for x = mu + F h + eps with h ~ N(0, I_q), eps ~ N(0, Sigma).
PldaModel fit_gplda(const std::vector<Eigen::VectorXd>& vectors, const std::vector<int>& labels,
                    int latent_dim, int iterations = 20);

// Precomputed factorization for trial scoring.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);
  // log p(e,t | same) - log p(e) p(t); symmetric in its arguments
  double score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::Index q_ = 0;
  Eigen::LLT<Eigen::MatrixXd> within_;    // Sigma
  Eigen::LLT<Eigen::MatrixXd> total_;     // Sigma + F F^T
  Eigen::LLT<Eigen::MatrixXd> same_sum_;  // Sigma + 2 F F^T
  double logdet_within_ = 0.0;
  double logdet_total_ = 0.0;
  double logdet_same_sum_ = 0.0;
};

double score_gplda(const PldaModel& model, const Eigen::VectorXd& enroll,
                   const Eigen::VectorXd& test);

// magic "FBPL", u32 D, u32 q, f32 mu, f32 F row-major, f32 Sigma row-major
void save_plda(const std::string& path, const PldaModel& model);
PldaModel load_plda(const std::string& path);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct EerResult {
  double eer = 0.0;        // fraction in [0, 1]
  double threshold = 0.0;  // score at the crossing
};

struct DetPoint {
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
};

// Operating points at thresholds between consecutive distinct scores, with
// the two saturation points (1,0) and (0,1) at the ends. FAR non-increasing,
// FRR non-decreasing along the list.
std::vector<DetPoint> det_points(const ScoreSet& scores);

// FAR(t) = fraction of impostor >= t, FRR(t) = fraction of genuine < t;
// crossing of the curves with linear interpolation between adjacent
// operating points.
EerResult compute_eer(const ScoreSet& scores);

struct Trial {
  std::string enroll_utt;
  std::string test_utt;
  bool genuine = false;
};

// CSV enroll_utt,test_utt,label with label in {genuine, impostor}
std::vector<Trial> load_trial_list(const std::string& path);
void save_trial_list(const std::string& path, const std::vector<Trial>& trials);
// CSV enroll_utt,test_utt,label,llr
void save_score_dump(const std::string& path, const std::vector<Trial>& trials,
                     const std::vector<double>& llrs);

struct BackendConfig {
  int lda_dim = 150;
  int plda_latent = 100;  // capped at the effective LDA dimension minus one
  int plda_iterations = 20;
};

// WCCN -> LDA -> length normalization -> GPLDA, fit on labeled embeddings.
class VerificationBackend {
 public:
  void fit(const std::vector<Eigen::VectorXd>& vectors, const std::vector<int>& labels,
           const BackendConfig& cfg);
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  double score(const Eigen::VectorXd& enroll_raw, const Eigen::VectorXd& test_raw) const;
  const PldaModel& plda() const { return plda_; }
  const LinearTransform& wccn() const { return wccn_; }
  const LinearTransform& lda() const { return lda_; }

 private:
  LinearTransform wccn_;
  LinearTransform lda_;
  PldaModel plda_;
  std::optional<PldaScorer> scorer_;
};

}  // namespace fusebio
