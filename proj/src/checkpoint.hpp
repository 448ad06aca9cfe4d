// Copyright 2026 The csran authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container: 4-byte magic, u32 version, u64 manifest length, a
// JSON manifest (config echo, task, vocabularies, parameter names + shapes,
// precision) and the raw parameter arrays in manifest order. Saving and
// loading on one platform reproduces forward outputs bit-exactly.

#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "model.hpp"

namespace csran {

inline constexpr char kCheckpointMagic[4] = {'C', 'S', 'R', 'N'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  ModelConfig config;
  std::string task;
  std::vector<std::string> vocab_words, vocab_chars;
  std::vector<int> frozen_word_rows;  // beyond the always-frozen PAD row
  std::vector<std::pair<std::string, Shape>> params;
  uint64_t blob_offset = 0;
};

namespace detail {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"word_dim", c.word_dim},
          {"char_dim", c.char_dim},
          {"char_hidden", c.char_hidden},
          {"hidden", c.hidden},
          {"stack_depth", c.stack_depth},
          {"agg_depth", c.agg_depth},
          {"prediction_layers", c.prediction_layers},
          {"prediction_hidden", c.prediction_hidden},
          {"num_classes", c.num_classes},
          {"fm_factor", c.fm_factor},
          {"use_highway", c.use_highway},
          {"use_mar", c.use_mar},
          {"use_csra", c.use_csra},
          {"dropout", c.dropout},
          {"precision", precision_name(c.precision)}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.word_dim = j.at("word_dim");
  c.char_dim = j.at("char_dim");
  c.char_hidden = j.at("char_hidden");
  c.hidden = j.at("hidden");
  c.stack_depth = j.at("stack_depth");
  c.agg_depth = j.at("agg_depth");
  c.prediction_layers = j.at("prediction_layers");
  c.prediction_hidden = j.at("prediction_hidden");
  c.num_classes = j.at("num_classes");
  c.fm_factor = j.at("fm_factor");
  c.use_highway = j.at("use_highway");
  c.use_mar = j.at("use_mar");
  c.use_csra = j.at("use_csra");
  c.dropout = j.at("dropout");
  c.precision = precision_from_string(j.at("precision"));
  return c;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const CsranModel<T>& model, const std::string& task,
                     const Vocab& words, const Vocab& chars) {
  nlohmann::json manifest;
  manifest["format"] = "csran-checkpoint";
  manifest["config"] = detail::config_to_json(model.cfg);
  manifest["task"] = task;
  manifest["vocab_words"] = words.id2tok;
  manifest["vocab_chars"] = chars.id2tok;
  std::vector<int> frozen;
  for (int r = 1; r < model.words.vocab_size(); ++r)
    if (model.words.frozen_rows[r]) frozen.push_back(r);
  manifest["frozen_word_rows"] = frozen;
  auto params = model.parameters(false);
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& [name, p] : params) plist.push_back({{"name", name}, {"shape", p->shape}});
  manifest["params"] = plist;
  const std::string mtext = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(detail::cat("cannot write checkpoint '", path, "'"));
  out.write(kCheckpointMagic, 4);
  const uint32_t ver = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  const uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, p] : params) {
    (void)name;
    out.write(reinterpret_cast<const char*>(p->data.data()),
              static_cast<std::streamsize>(p->data.size() * sizeof(T)));
  }
  if (!out) throw DataError(detail::cat("failed writing checkpoint '", path, "'"));
}

inline CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(detail::cat("cannot open checkpoint '", path, "'"));
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError(detail::cat("'", path, "' is not a csran checkpoint"));
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kCheckpointVersion)
    throw FormatError(detail::cat("unsupported checkpoint version ", ver));
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw FormatError(detail::cat("truncated checkpoint '", path, "'"));
  nlohmann::json manifest = nlohmann::json::parse(mtext);

  CheckpointInfo info;
  info.config = detail::config_from_json(manifest.at("config"));
  info.task = manifest.at("task");
  info.vocab_words = manifest.at("vocab_words").get<std::vector<std::string>>();
  info.vocab_chars = manifest.at("vocab_chars").get<std::vector<std::string>>();
  info.frozen_word_rows = manifest.at("frozen_word_rows").get<std::vector<int>>();
  for (const auto& p : manifest.at("params"))
    info.params.emplace_back(p.at("name"), p.at("shape").get<Shape>());
  info.blob_offset = 4 + sizeof(uint32_t) + sizeof(uint64_t) + mlen;
  return info;
}

inline Vocab vocab_from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
    throw FormatError("checkpoint vocabulary is missing reserved entries");
  Vocab v;
  for (size_t i = 2; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

// Fill a freshly constructed model's parameters from the checkpoint blob.
// Reading back at the precision it was written with is byte-exact.
template <class T>
void load_checkpoint_params(const std::string& path, const CheckpointInfo& info,
                            CsranModel<T>& model) {
  auto params = model.parameters(false);
  if (params.size() != info.params.size())
    throw FormatError(detail::cat("checkpoint lists ", info.params.size(),
                                  " parameters, model has ", params.size()));
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(info.blob_offset));
  const size_t elem = info.config.precision == Precision::f64 ? 8 : 4;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    if (name != info.params[i].first || p->shape != info.params[i].second)
      throw FormatError(detail::cat("checkpoint parameter ", info.params[i].first,
                                    " does not match model parameter ", name));
    std::vector<char> buf(p->data.size() * elem);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw FormatError(detail::cat("truncated checkpoint '", path, "'"));
    if (elem == sizeof(T)) {
      std::memcpy(p->data.data(), buf.data(), buf.size());
    } else if (elem == 8) {
      const double* src = reinterpret_cast<const double*>(buf.data());
      for (size_t j = 0; j < p->data.size(); ++j) p->data[j] = static_cast<T>(src[j]);
    } else {
      const float* src = reinterpret_cast<const float*>(buf.data());
      for (size_t j = 0; j < p->data.size(); ++j) p->data[j] = static_cast<T>(src[j]);
    }
  }
  for (int r : info.frozen_word_rows) model.words.frozen_rows[r] = 1;
}

}  // namespace csran
