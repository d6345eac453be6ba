// The three fusion strategies: composite images (sensor level), embedding
// concatenation (feature level) and posterior concatenation (score level),
// plus the shared softmax fusion classifier.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fusebio/embeddings.hpp"
#include "fusebio/image.hpp"
#include "fusebio/net.hpp"

namespace fusebio {

struct FusionVector {
  Eigen::VectorXd values;
  // (modality name, dim) in concatenation order
  std::vector<std::pair<std::string, int>> provenance;
};

// voice first, face second; both must belong to the same utterance
FusionVector concat_features(const Embedding& voice, const Embedding& face);

// Splits a fusion vector back into its components by provenance.
std::vector<Eigen::VectorXd> split_by_provenance(const FusionVector& v);

// voice posteriors first; both must sum to 1 within 1e-6 and agree on K
FusionVector concat_scores(const Eigen::VectorXd& voice_posterior,
                           const Eigen::VectorXd& face_posterior);

enum class CompositeLayout { kFaceLeft, kFaceTop };

struct CompositeImage {
  GrayImage image;
  CompositeLayout layout = CompositeLayout::kFaceLeft;
  struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
  };
  Rect face_region;
  Rect voice_region;
};

// Each source is nearest-neighbor resized into its half of the output; the
// output must be even along the split axis.
CompositeImage build_composite_image(const GrayImage& face, const GrayImage& gtg_image,
                                     CompositeLayout layout, int out_w = 224, int out_h = 224);

// Rotation about the image center (nearest neighbor) followed by a pixel
// translation; vacated pixels are zero. Rotation is limited to [-20, 20]
// degrees and translations to [-5, 5] pixels.
GrayImage augment_image(const GrayImage& img, double rotation_deg, int dx, int dy);

struct Augmentation {
  double rotation_deg = 0.0;
  int dx = 0;
  int dy = 0;
};

Augmentation sample_augmentation(Rng& rng);

// Block-mean downsample to side x side, flattened row-major, scaled to [0,1].
Eigen::VectorXd sensor_fusion_features(const CompositeImage& comp, int downsample);

using SoftmaxFusionModel = SoftmaxClassifier;

SoftmaxFusionModel train_fusion(const std::vector<FusionVector>& vectors,
                                const std::vector<int>& labels, int n_classes,
                                const TrainConfig& cfg);

// (argmax class with ties toward the lowest index, posterior)
std::pair<int, Eigen::VectorXd> predict_fusion(const SoftmaxFusionModel& model,
                                               const Eigen::VectorXd& v);

// magic "FBSM", u32 n_classes, u32 input_dim, f32 weights row-major, f32 bias
void save_fusion_model(const std::string& path, const SoftmaxFusionModel& model);
SoftmaxFusionModel load_fusion_model(const std::string& path);

}  // namespace fusebio
