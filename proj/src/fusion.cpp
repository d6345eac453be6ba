#include "fusebio/fusion.hpp"

#include <cmath>
#include <fstream>

namespace fusebio {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxRotationDeg = 20.0;
constexpr int kMaxTranslationPx = 5;

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kVoiceXvec: return "voice_xvec";
    case Modality::kVoiceGtg: return "voice_gtg";
    case Modality::kFace: return "face";
  }
  return "unknown";
}

}  // namespace

FusionVector concat_features(const Embedding& voice, const Embedding& face) {
  if (voice.utt_id != face.utt_id) {
    throw UtteranceMismatch("cannot fuse '" + voice.utt_id + "' with '" + face.utt_id + "'");
  }
  if (voice.values.size() == 0 || face.values.size() == 0) {
    throw EmptyVector("cannot fuse an empty embedding");
  }
  FusionVector out;
  out.values.resize(voice.values.size() + face.values.size());
  out.values << voice.values, face.values;
  out.provenance.emplace_back(modality_name(voice.modality),
                              static_cast<int>(voice.values.size()));
  out.provenance.emplace_back(modality_name(face.modality), static_cast<int>(face.values.size()));
  return out;
}

std::vector<Eigen::VectorXd> split_by_provenance(const FusionVector& v) {
  std::vector<Eigen::VectorXd> parts;
  Eigen::Index offset = 0;
  for (const auto& [name, dim] : v.provenance) {
    parts.emplace_back(v.values.segment(offset, dim));
    offset += dim;
  }
  if (offset != v.values.size()) throw DimMismatch("provenance does not cover the vector");
  return parts;
}

FusionVector concat_scores(const Eigen::VectorXd& voice_posterior,
                           const Eigen::VectorXd& face_posterior) {
  if (voice_posterior.size() != face_posterior.size()) {
    throw DimMismatch("posterior lengths differ");
  }
  if (voice_posterior.size() == 0) throw EmptyVector("empty posterior");
  for (const Eigen::VectorXd* p : {&voice_posterior, &face_posterior}) {
    if (std::abs(p->sum() - 1.0) > 1e-6 || p->minCoeff() < 0.0) {
      throw NotAPosterior("scores must be a probability distribution");
    }
  }
  FusionVector out;
  out.values.resize(2 * voice_posterior.size());
  out.values << voice_posterior, face_posterior;
  out.provenance.emplace_back("voice_posterior", static_cast<int>(voice_posterior.size()));
  out.provenance.emplace_back("face_posterior", static_cast<int>(face_posterior.size()));
  return out;
}

CompositeImage build_composite_image(const GrayImage& face, const GrayImage& gtg_image,
                                     CompositeLayout layout, int out_w, int out_h) {
  if (out_w < 2 || out_h < 2) throw InvalidLayout("composite too small");
  if (layout == CompositeLayout::kFaceLeft && out_w % 2 != 0) {
    throw InvalidLayout("width must be even for a left/right split");
  }
  if (layout == CompositeLayout::kFaceTop && out_h % 2 != 0) {
    throw InvalidLayout("height must be even for a top/bottom split");
  }

  CompositeImage comp;
  comp.layout = layout;
  comp.image = GrayImage(out_w, out_h);
  if (layout == CompositeLayout::kFaceLeft) {
    comp.face_region = {0, 0, out_w / 2, out_h};
    comp.voice_region = {out_w / 2, 0, out_w / 2, out_h};
  } else {
    comp.face_region = {0, 0, out_w, out_h / 2};
    comp.voice_region = {0, out_h / 2, out_w, out_h / 2};
  }

  const GrayImage face_r = resize_nearest(face, comp.face_region.w, comp.face_region.h);
  const GrayImage gtg_r = resize_nearest(gtg_image, comp.voice_region.w, comp.voice_region.h);
  for (int y = 0; y < comp.face_region.h; ++y) {
    for (int x = 0; x < comp.face_region.w; ++x) {
      comp.image.at(comp.face_region.y + y, comp.face_region.x + x) = face_r.at(y, x);
    }
  }
  for (int y = 0; y < comp.voice_region.h; ++y) {
    for (int x = 0; x < comp.voice_region.w; ++x) {
      comp.image.at(comp.voice_region.y + y, comp.voice_region.x + x) = gtg_r.at(y, x);
    }
  }
  return comp;
}

GrayImage augment_image(const GrayImage& img, double rotation_deg, int dx, int dy) {
  if (std::abs(rotation_deg) > kMaxRotationDeg) {
    throw OutOfConfiguredRange("rotation outside [-20, 20] degrees");
  }
  if (std::abs(dx) > kMaxTranslationPx || std::abs(dy) > kMaxTranslationPx) {
    throw OutOfConfiguredRange("translation outside [-5, 5] pixels");
  }

  const double theta = rotation_deg * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;

  GrayImage rotated(img.width, img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // inverse rotation of the destination pixel
      const double rx = c * (x - cx) + s * (y - cy) + cx;
      const double ry = -s * (x - cx) + c * (y - cy) + cy;
      const long sx = std::lrint(rx);
      const long sy = std::lrint(ry);
      if (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height) {
        rotated.at(y, x) = img.at(static_cast<int>(sy), static_cast<int>(sx));
      }
    }
  }

  GrayImage out(img.width, img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= img.height) continue;
    for (int x = 0; x < img.width; ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= img.width) continue;
      out.at(y, x) = rotated.at(sy, sx);
    }
  }
  return out;
}

Augmentation sample_augmentation(Rng& rng) {
  Augmentation a;
  a.rotation_deg = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg);
  a.dx = static_cast<int>(rng.uniform_index(2 * kMaxTranslationPx + 1)) - kMaxTranslationPx;
  a.dy = static_cast<int>(rng.uniform_index(2 * kMaxTranslationPx + 1)) - kMaxTranslationPx;
  return a;
}

Eigen::VectorXd sensor_fusion_features(const CompositeImage& comp, int downsample) {
  if (downsample < 8 || downsample > 64) throw InvalidRange("downsample must lie in [8, 64]");
  const GrayImage& img = comp.image;
  Eigen::VectorXd out(static_cast<Eigen::Index>(downsample) * downsample);
  for (int by = 0; by < downsample; ++by) {
    const int y0 = by * img.height / downsample;
    const int y1 = (by + 1) * img.height / downsample;
    for (int bx = 0; bx < downsample; ++bx) {
      const int x0 = bx * img.width / downsample;
      const int x1 = (bx + 1) * img.width / downsample;
      double acc = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) acc += img.at(y, x);
      }
      const int count = (y1 - y0) * (x1 - x0);
      out(static_cast<Eigen::Index>(by) * downsample + bx) =
          count > 0 ? acc / (255.0 * count) : 0.0;
    }
  }
  return out;
}

SoftmaxFusionModel train_fusion(const std::vector<FusionVector>& vectors,
                                const std::vector<int>& labels, int n_classes,
                                const TrainConfig& cfg) {
  if (vectors.empty()) throw EmptyDataset("no fusion vectors");
  if (vectors.size() != labels.size()) throw DimMismatch("vectors/labels size mismatch");
  if (n_classes < 2) throw InvalidSpec("need at least 2 classes");
  const Eigen::Index dim = vectors.front().values.size();
  std::vector<Eigen::VectorXd> inputs;
  inputs.reserve(vectors.size());
  for (const FusionVector& v : vectors) {
    if (v.values.size() != dim) throw DimMismatch("inconsistent fusion dims");
    inputs.push_back(v.values);
  }
  return train_softmax_classifier(inputs, labels, n_classes, cfg);
}

std::pair<int, Eigen::VectorXd> predict_fusion(const SoftmaxFusionModel& model,
                                               const Eigen::VectorXd& v) {
  const Eigen::VectorXd posterior = model.posterior(v);
  return {argmax_lowest(posterior), posterior};
}

void save_fusion_model(const std::string& path, const SoftmaxFusionModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_magic(os, "FBSM");
  write_u32(os, static_cast<std::uint32_t>(model.weight.rows()));
  write_u32(os, static_cast<std::uint32_t>(model.weight.cols()));
  for (Eigen::Index r = 0; r < model.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weight.cols(); ++c) {
      write_f32(os, static_cast<float>(model.weight(r, c)));
    }
  }
  for (Eigen::Index r = 0; r < model.bias.size(); ++r) {
    write_f32(os, static_cast<float>(model.bias(r)));
  }
  if (!os) throw IoError("write failed: " + path);
}

SoftmaxFusionModel load_fusion_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  expect_magic(is, "FBSM");
  const std::uint32_t n_classes = read_u32(is);
  const std::uint32_t input_dim = read_u32(is);
  if (n_classes == 0 || input_dim == 0) throw CorruptFile("degenerate fusion model: " + path);
  SoftmaxFusionModel model;
  model.weight.resize(n_classes, input_dim);
  for (std::uint32_t r = 0; r < n_classes; ++r) {
    for (std::uint32_t c = 0; c < input_dim; ++c) {
      model.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_f32(is);
    }
  }
  model.bias.resize(n_classes);
  for (std::uint32_t r = 0; r < n_classes; ++r) {
    model.bias(static_cast<Eigen::Index>(r)) = read_f32(is);
  }
  return model;
}

}  // namespace fusebio
