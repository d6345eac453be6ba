// Flat key=value run configuration. Precedence: command line > config file
// > built-in default. Unknown keys are rejected.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fusebio/embeddings.hpp"
#include "fusebio/evaluation.hpp"
#include "fusebio/frontend.hpp"
#include "fusebio/net.hpp"

namespace fusebio {

class RunConfig {
 public:
  // every known key with its default value and a one-line description
  struct KeyDoc {
    const char* key;
    const char* default_value;
    const char* doc;
  };
  static const std::vector<KeyDoc>& key_docs();

  // config_path may be empty; overrides come from the command line
  static RunConfig resolve(const std::string& config_path,
                           const std::vector<std::pair<std::string, std::string>>& overrides);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // sorted key=value lines, one per key (resolved_config.txt)
  std::string render() const;

  FrontendConfig frontend() const;
  TrainConfig voice_train() const;
  TrainConfig fusion_train() const;
  VoiceNetSpec voicenet() const;
  SynthConfig synth() const;
  BackendConfig backend() const;
  EvalOptions eval_options() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fusebio
