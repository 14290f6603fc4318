#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "textshift/cnn_model.hpp"
#include "textshift/fasttext.hpp"
#include "textshift/optim.hpp"
#include "textshift/training.hpp"

namespace textshift {

// Layout, all integers little-endian:
//   "SNAP" | u16 version | u8 kind | u64 n | n bytes JSON metadata
//   | u64 m | m x f64 payload | u32 CRC32C of every preceding byte
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class ModelKind : std::uint8_t { Cnn = 1, FastText = 2 };

std::string_view to_string(ModelKind kind);

std::uint32_t crc32c(std::span<const std::uint8_t> bytes);

struct CheckpointExtras {
  std::optional<OptimizerState> optimizer;
  /// Free-form metadata stored alongside (e.g. the training config).
  nlohmann::json info = nlohmann::json::object();
};

void save_model(const CnnModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras = {});
void save_model(const FastTextModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras = {});
void save_model(const AnyModel& model, const std::filesystem::path& path,
                const CheckpointExtras& extras = {});

/// Validates magic, version and checksum; returns the stored kind.
ModelKind peek_model_kind(const std::filesystem::path& path);

/// BadModelKind when the file holds the other model kind.
CnnModel load_cnn(const std::filesystem::path& path, CheckpointExtras* extras = nullptr);
FastTextModel load_fasttext(const std::filesystem::path& path, CheckpointExtras* extras = nullptr);
AnyModel load_model(const std::filesystem::path& path, CheckpointExtras* extras = nullptr);

}  // namespace textshift
