#pragma once

#include "gsgrasp/contact.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gsg {

// Exit codes: 0 ok, 2 invalid input, 3 computation failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCompute = 3;

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> log;
  std::vector<std::filesystem::path> artifacts;  // final locations under --out
};

// Union of every subcommand's flags; unused fields are ignored. Paths left
// empty fall back to the manifest entries.
struct CommandArgs {
  std::filesystem::path manifest;
  std::filesystem::path skeleton;
  std::filesystem::path config;
  std::filesystem::path out;
  double tau = kDefaultTau;
  std::vector<int> cameras;  // empty = all
  int threads = 0;           // 0 = environment / OpenMP default
  std::optional<std::uint64_t> seed;

  // grasp
  std::filesystem::path hand;
  std::filesystem::path grid;
  std::filesystem::path object;
  std::filesystem::path poses;  // directory of pose JSON files
  // evaluate
  std::filesystem::path pred;
  std::filesystem::path gt;
  // synth
  std::string scene = "two-bone-finger";
  int views = 20;
  int width = 128;
  int height = 128;
};

// Each command stages its outputs in a sibling temp directory and moves them
// to `out` only on success, together with an artifacts.json listing them.
// Errors are caught and mapped to exit codes; nothing is left under `out`.
CommandResult cmd_train_hand(const CommandArgs& args);
CommandResult cmd_train_object(const CommandArgs& args);
CommandResult cmd_fit_pose(const CommandArgs& args);
CommandResult cmd_grasp(const CommandArgs& args);
CommandResult cmd_evaluate(const CommandArgs& args);
CommandResult cmd_synth(const CommandArgs& args);

// Maps a caught exception to an exit code.
int exit_code_for(const std::exception& e);

}  // namespace gsg
