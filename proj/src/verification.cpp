#include "fusebio/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fusebio {

namespace {

constexpr double kCovRegScale = 1e-6;

struct ClassGroups {
  std::vector<std::vector<std::size_t>> members;  // indices per class
  Eigen::Index dim = 0;
};

ClassGroups group_by_class(const std::vector<Eigen::VectorXd>& vectors,
                           const std::vector<int>& labels, int min_per_class) {
  if (vectors.empty() || vectors.size() != labels.size()) {
    throw DegenerateClasses("vectors/labels mismatch or empty");
  }
  ClassGroups g;
  g.dim = vectors.front().size();
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != g.dim) throw DimMismatch("inconsistent vector dims");
    by_label[labels[i]].push_back(i);
  }
  if (by_label.size() < 2) throw DegenerateClasses("need at least 2 classes");
  for (auto& [label, members] : by_label) {
    if (static_cast<int>(members.size()) < min_per_class) {
      throw DegenerateClasses("class " + std::to_string(label) + " has fewer than " +
                              std::to_string(min_per_class) + " vectors");
    }
    g.members.push_back(std::move(members));
  }
  return g;
}

Eigen::VectorXd global_mean(const std::vector<Eigen::VectorXd>& vectors) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(vectors.front().size());
  for (const auto& v : vectors) mu += v;
  return mu / static_cast<double>(vectors.size());
}

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    // one retry with the standard regularizer
    const double lambda = kCovRegScale * m.trace() / static_cast<double>(m.rows());
    Eigen::MatrixXd fixed = m;
    fixed.diagonal().array() += std::max(lambda, 1e-12);
    llt.compute(fixed);
    if (llt.info() != Eigen::Success) {
      throw SingularCovariance(std::string("not positive definite: ") + what);
    }
  }
  return llt;
}

}  // namespace

LinearTransform fit_wccn(const std::vector<Eigen::VectorXd>& vectors,
                         const std::vector<int>& labels) {
  const ClassGroups groups = group_by_class(vectors, labels, 2);
  const Eigen::Index d = groups.dim;

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
  for (const auto& members : groups.members) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i : members) mean += vectors[i];
    mean /= static_cast<double>(members.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i : members) {
      const Eigen::VectorXd c = vectors[i] - mean;
      cov.noalias() += c * c.transpose();
    }
    w += cov / static_cast<double>(members.size());
  }
  w /= static_cast<double>(groups.members.size());

  const double tr = w.trace();
  if (!(tr > 0.0)) throw DegenerateClasses("zero within-class covariance");
  w.diagonal().array() += kCovRegScale * tr / static_cast<double>(d);

  const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_or_throw(w, "within-class covariance");
  const Eigen::MatrixXd w_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::LLT<Eigen::MatrixXd> inv_llt = cholesky_or_throw(w_inv, "inverse covariance");

  LinearTransform t;
  t.kind = TransformKind::kWccn;
  t.mean = global_mean(vectors);
  t.matrix = inv_llt.matrixL().transpose();  // B^T B = W^{-1}
  return t;
}

LinearTransform fit_lda(const std::vector<Eigen::VectorXd>& vectors,
                        const std::vector<int>& labels, int out_dim) {
  if (out_dim < 1) throw InvalidRange("LDA output dimension must be >= 1");
  const ClassGroups groups = group_by_class(vectors, labels, 2);
  const Eigen::Index d = groups.dim;
  const int n_classes = static_cast<int>(groups.members.size());
  const double n_total = static_cast<double>(vectors.size());

  const Eigen::VectorXd mu = global_mean(vectors);
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d, d);
  for (const auto& members : groups.members) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i : members) mean += vectors[i];
    mean /= static_cast<double>(members.size());
    for (std::size_t i : members) {
      const Eigen::VectorXd c = vectors[i] - mean;
      sw.noalias() += c * c.transpose();
    }
    const Eigen::VectorXd cm = mean - mu;
    sb.noalias() += static_cast<double>(members.size()) * cm * cm.transpose();
  }
  sw /= n_total;
  sb /= n_total;

  const double tr = sw.trace();
  if (!(tr > 0.0)) throw DegenerateClasses("zero within-class scatter");
  sw.diagonal().array() += kCovRegScale * tr / static_cast<double>(d);

  const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_or_throw(sw, "within-class scatter");
  const Eigen::MatrixXd l_inv =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd whitened = l_inv * sb * l_inv.transpose();
  whitened = 0.5 * (whitened + whitened.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(whitened);
  if (eig.info() != Eigen::Success) throw SingularCovariance("LDA eigensolver failed");

  const int effective =
      std::min<int>({out_dim, n_classes - 1, static_cast<int>(d)});
  LinearTransform t;
  t.kind = TransformKind::kLda;
  t.mean = mu;
  t.clipped = effective < out_dim;
  if (t.clipped) {
    std::fprintf(stderr, "warning: LDA output clipped from %d to %d (rank limit)\n", out_dim,
                 effective);
  }
  t.matrix.resize(effective, d);
  // eigenvalues come out ascending; take the top ones in descending order
  for (int k = 0; k < effective; ++k) {
    const Eigen::VectorXd u = eig.eigenvectors().col(d - 1 - k);
    t.matrix.row(k) = (l_inv.transpose() * u).transpose();
  }
  return t;
}

Eigen::VectorXd apply_transform(const LinearTransform& t, const Eigen::VectorXd& v) {
  if (v.size() != t.in_dim()) throw DimMismatch("transform input dim mismatch");
  return t.matrix * (v - t.mean);
}

Eigen::VectorXd length_normalize(const Eigen::VectorXd& v) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

PldaModel fit_gplda(const std::vector<Eigen::VectorXd>& vectors, const std::vector<int>& labels,
                    int latent_dim, int iterations) {
  const ClassGroups groups = group_by_class(vectors, labels, 2);
  const Eigen::Index d = groups.dim;
  if (latent_dim < 0 || latent_dim > d) throw InvalidRange("need 0 <= latent_dim <= dim");
  if (iterations < 1) throw InvalidRange("need at least one EM iteration");
  const Eigen::Index q = latent_dim;
  const double n_total = static_cast<double>(vectors.size());
  const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);

  PldaModel model;
  model.mu = global_mean(vectors);

  // centered data, D x N
  Eigen::MatrixXd centered(d, vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    centered.col(static_cast<Eigen::Index>(i)) = vectors[i] - model.mu;
  }
  // per-class sums of centered vectors
  const std::size_t n_classes = groups.members.size();
  Eigen::MatrixXd class_sums(d, static_cast<Eigen::Index>(n_classes));
  Eigen::VectorXd class_counts(static_cast<Eigen::Index>(n_classes));
  for (std::size_t c = 0; c < n_classes; ++c) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (std::size_t i : groups.members[c]) s += centered.col(static_cast<Eigen::Index>(i));
    class_sums.col(static_cast<Eigen::Index>(c)) = s;
    class_counts(static_cast<Eigen::Index>(c)) = static_cast<double>(groups.members[c].size());
  }

  const Eigen::MatrixXd total_scatter = centered * centered.transpose() / n_total;
  const double reg = kCovRegScale * std::max(total_scatter.trace(), 1e-30) / static_cast<double>(d);

  // data-driven start: split the total scatter between the subspace and the
  // residual along the leading principal directions
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total_scatter);
  if (eig.info() != Eigen::Success) throw SingularCovariance("PLDA init eigensolver failed");
  model.f.resize(d, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double ev = std::max(eig.eigenvalues()(d - 1 - j) / 2.0, reg);
    model.f.col(j) = eig.eigenvectors().col(d - 1 - j) * std::sqrt(ev);
  }
  model.sigma = total_scatter / 2.0;
  model.sigma.diagonal().array() += reg;

  for (int iter = 0; iter < iterations; ++iter) {
    const Eigen::LLT<Eigen::MatrixXd> sigma_llt =
        cholesky_or_throw(model.sigma, "PLDA residual covariance");
    const double logdet_sigma = logdet_from_llt(sigma_llt);
    const Eigen::MatrixXd sigma_inv_f = sigma_llt.solve(model.f);     // D x q
    const Eigen::MatrixXd ft_sigma_inv_f = model.f.transpose() * sigma_inv_f;  // q x q

    // observed-data log-likelihood under the current parameters
    const Eigen::MatrixXd solved = sigma_llt.solve(centered);
    double ll = -0.5 * (centered.array() * solved.array()).sum();
    ll -= n_total * (static_cast<double>(d) * half_log_2pi + 0.5 * logdet_sigma);

    Eigen::MatrixXd sum_s_m = Eigen::MatrixXd::Zero(d, q);   // sum_c s_c m_c^T
    Eigen::MatrixXd sum_n_hh = Eigen::MatrixXd::Zero(q, q);  // sum_c n_c E[h h^T]
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double n_c = class_counts(static_cast<Eigen::Index>(c));
      const Eigen::VectorXd& s_c = class_sums.col(static_cast<Eigen::Index>(c));
      if (q > 0) {
        Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(q, q) + n_c * ft_sigma_inv_f;
        const Eigen::LLT<Eigen::MatrixXd> p_llt = cholesky_or_throw(precision, "PLDA posterior");
        const Eigen::VectorXd rhs = sigma_inv_f.transpose() * s_c;
        const Eigen::VectorXd m_c = p_llt.solve(rhs);
        const Eigen::MatrixXd cov_c = p_llt.solve(Eigen::MatrixXd::Identity(q, q));
        sum_s_m.noalias() += s_c * m_c.transpose();
        sum_n_hh.noalias() += n_c * (cov_c + m_c * m_c.transpose());
        // p(X_c) = p(X_c | h = 0) p(h = 0) / p(h = 0 | X_c)
        ll += -0.5 * logdet_from_llt(p_llt) + 0.5 * m_c.dot(precision * m_c);
      }
    }
    model.log_likelihood.push_back(ll);

    if (q > 0) {
      const Eigen::LLT<Eigen::MatrixXd> hh_llt = cholesky_or_throw(sum_n_hh, "PLDA M-step");
      model.f = hh_llt.solve(sum_s_m.transpose()).transpose();
      Eigen::MatrixXd sigma_new =
          (centered * centered.transpose() - model.f * sum_s_m.transpose()) / n_total;
      model.sigma = 0.5 * (sigma_new + sigma_new.transpose());
    } else {
      model.sigma = total_scatter;
    }
    model.sigma.diagonal().array() += reg;
    model.iterations_run = iter + 1;
  }
  return model;
}

PldaScorer::PldaScorer(const PldaModel& model) : mu_(model.mu), q_(model.latent_dim()) {
  const Eigen::MatrixXd psi = model.f * model.f.transpose();
  within_ = cholesky_or_throw(model.sigma, "scorer within covariance");
  total_ = cholesky_or_throw(model.sigma + psi, "scorer total covariance");
  same_sum_ = cholesky_or_throw(model.sigma + 2.0 * psi, "scorer joint covariance");
  logdet_within_ = logdet_from_llt(within_);
  logdet_total_ = logdet_from_llt(total_);
  logdet_same_sum_ = logdet_from_llt(same_sum_);
}

double PldaScorer::score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const {
  if (enroll.size() != mu_.size() || test.size() != mu_.size()) {
    throw DimMismatch("trial vector dim mismatch");
  }
  if (q_ == 0) return 0.0;  // no shared identity component

  const Eigen::VectorXd e = enroll - mu_;
  const Eigen::VectorXd t = test - mu_;
  const double inv_sqrt2 = 0.70710678118654752440;
  const Eigen::VectorXd s = (e + t) * inv_sqrt2;
  const Eigen::VectorXd diff = (e - t) * inv_sqrt2;

  double llr = logdet_total_ - 0.5 * (logdet_same_sum_ + logdet_within_);
  llr -= 0.5 * (s.dot(same_sum_.solve(s)) + diff.dot(within_.solve(diff)));
  llr += 0.5 * (e.dot(total_.solve(e)) + t.dot(total_.solve(t)));
  return llr;
}

double score_gplda(const PldaModel& model, const Eigen::VectorXd& enroll,
                   const Eigen::VectorXd& test) {
  return PldaScorer(model).score(enroll, test);
}

void save_plda(const std::string& path, const PldaModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_magic(os, "FBPL");
  const Eigen::Index d = model.dim();
  const Eigen::Index q = model.latent_dim();
  write_u32(os, static_cast<std::uint32_t>(d));
  write_u32(os, static_cast<std::uint32_t>(q));
  for (Eigen::Index i = 0; i < d; ++i) write_f32(os, static_cast<float>(model.mu(i)));
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < q; ++c) write_f32(os, static_cast<float>(model.f(r, c)));
  }
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) write_f32(os, static_cast<float>(model.sigma(r, c)));
  }
  if (!os) throw IoError("write failed: " + path);
}

PldaModel load_plda(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  expect_magic(is, "FBPL");
  const std::uint32_t d = read_u32(is);
  const std::uint32_t q = read_u32(is);
  if (d == 0 || q > d) throw CorruptFile("bad PLDA dims: " + path);
  PldaModel model;
  model.mu.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) model.mu(static_cast<Eigen::Index>(i)) = read_f32(is);
  model.f.resize(d, q);
  for (std::uint32_t r = 0; r < d; ++r) {
    for (std::uint32_t c = 0; c < q; ++c) {
      model.f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_f32(is);
    }
  }
  model.sigma.resize(d, d);
  for (std::uint32_t r = 0; r < d; ++r) {
    for (std::uint32_t c = 0; c < d; ++c) {
      model.sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_f32(is);
    }
  }
  return model;
}

namespace {

double fraction_at_least(const std::vector<double>& sorted, double threshold) {
  // fraction of entries >= threshold
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

double fraction_below(const std::vector<double>& sorted, double threshold) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

std::vector<DetPoint> det_points(const ScoreSet& scores) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw EmptyPopulation("need both genuine and impostor scores");
  }
  std::vector<double> genuine = scores.genuine;
  std::vector<double> impostor = scores.impostor;
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());

  std::vector<double> pooled;
  pooled.reserve(genuine.size() + impostor.size());
  pooled.insert(pooled.end(), genuine.begin(), genuine.end());
  pooled.insert(pooled.end(), impostor.begin(), impostor.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  std::vector<DetPoint> points;
  points.push_back({1.0, 0.0, pooled.front() - 1.0});
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i) {
    const double t = 0.5 * (pooled[i] + pooled[i + 1]);
    points.push_back({fraction_at_least(impostor, t), fraction_below(genuine, t), t});
  }
  points.push_back({0.0, 1.0, pooled.back() + 1.0});
  return points;
}

EerResult compute_eer(const ScoreSet& scores) {
  const std::vector<DetPoint> points = det_points(scores);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double d1 = points[i].far - points[i].frr;
    const double d2 = points[i + 1].far - points[i + 1].frr;
    if (d1 == 0.0) return {points[i].far, points[i].threshold};
    if (d1 > 0.0 && d2 <= 0.0) {
      if (d2 == 0.0) return {points[i + 1].far, points[i + 1].threshold};
      const double alpha = d1 / (d1 - d2);
      return {points[i].far + alpha * (points[i + 1].far - points[i].far),
              points[i].threshold + alpha * (points[i + 1].threshold - points[i].threshold)};
    }
  }
  // FAR-FRR runs from +1 to -1, so a crossing always exists
  throw Error("no EER crossing found");
}

std::vector<Trial> load_trial_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<Trial> trials;
  std::string line;
  if (!std::getline(is, line) || line != "enroll_utt,test_utt,label") {
    throw CorruptFile("unexpected trial list header: " + path);
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Trial t;
    std::string label;
    if (!std::getline(ss, t.enroll_utt, ',') || !std::getline(ss, t.test_utt, ',') ||
        !std::getline(ss, label)) {
      throw CorruptFile("malformed trial line " + std::to_string(line_no) + ": " + path);
    }
    if (label == "genuine") {
      t.genuine = true;
    } else if (label == "impostor") {
      t.genuine = false;
    } else {
      throw CorruptFile("unknown trial label '" + label + "' in " + path);
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void save_trial_list(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "enroll_utt,test_utt,label\n";
  for (const Trial& t : trials) {
    os << t.enroll_utt << ',' << t.test_utt << ',' << (t.genuine ? "genuine" : "impostor")
       << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

void save_score_dump(const std::string& path, const std::vector<Trial>& trials,
                     const std::vector<double>& llrs) {
  if (trials.size() != llrs.size()) throw DimMismatch("trials/scores size mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "enroll_utt,test_utt,label,llr\n";
  char buf[64];
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", llrs[i]);
    os << trials[i].enroll_utt << ',' << trials[i].test_utt << ','
       << (trials[i].genuine ? "genuine" : "impostor") << ',' << buf << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

void VerificationBackend::fit(const std::vector<Eigen::VectorXd>& vectors,
                              const std::vector<int>& labels, const BackendConfig& cfg) {
  wccn_ = fit_wccn(vectors, labels);
  std::vector<Eigen::VectorXd> stage(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) stage[i] = apply_transform(wccn_, vectors[i]);
  lda_ = fit_lda(stage, labels, cfg.lda_dim);
  for (std::size_t i = 0; i < stage.size(); ++i) {
    stage[i] = length_normalize(apply_transform(lda_, stage[i]));
  }
  const int effective = static_cast<int>(lda_.out_dim());
  const int q = std::max(0, std::min(cfg.plda_latent, effective - 1));
  plda_ = fit_gplda(stage, labels, q, cfg.plda_iterations);
  scorer_.emplace(plda_);
}

Eigen::VectorXd VerificationBackend::project(const Eigen::VectorXd& v) const {
  return length_normalize(apply_transform(lda_, apply_transform(wccn_, v)));
}

double VerificationBackend::score(const Eigen::VectorXd& enroll_raw,
                                  const Eigen::VectorXd& test_raw) const {
  if (!scorer_) throw Error("backend not fitted");
  return scorer_->score(project(enroll_raw), project(test_raw));
}

}  // namespace fusebio
