#pragma once

#include <map>
#include <string>

#include "migate/model.hpp"
#include "migate/pipeline.hpp"
#include "migate/synth.hpp"

namespace migate {

// Declarative key-value run configuration: "[section]" headers, "key = value"
// lines, '#' comments. Parse errors carry the file name and line number.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& name);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::string require(const std::string& section, const std::string& key) const;
  int get_int(const std::string& section, const std::string& key,
              int fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  uint64_t get_u64(const std::string& section, const std::string& key,
                   uint64_t fallback) const;

  void set(const std::string& section, const std::string& key,
           const std::string& value);  // CLI overrides

 private:
  std::map<std::pair<std::string, std::string>, std::string> values_;
  std::string name_ = "<config>";
};

// Square-image conv stack reaching out_extent x out_extent x out_channels:
// stride-2 3x3 layers halve the extent (the ratio must be a power of two),
// then one stride-1 3x3 layer.
EncoderConfig make_encoder_config(int image_size, int out_extent,
                                  int out_channels);

// Section mappings; every key has a desk-scale default.
SyntheticSpec synth_spec_from_config(const Config& c);
ModelConfig model_config_from_config(const Config& c);
TrainConfig train_config_from_config(const Config& c);

}  // namespace migate
