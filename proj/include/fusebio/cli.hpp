// Command-line surface. Subcommands: synth, extract, train-voice,
// train-fusion, eval, report.
#pragma once

#include "fusebio/config.hpp"

namespace fusebio {

// stable exit codes for CI
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumericGate = 3;

int cmd_synth(const RunConfig& cfg);
int cmd_extract(const RunConfig& cfg);
int cmd_train_voice(const RunConfig& cfg);
int cmd_train_fusion(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);

int run_cli(int argc, const char* const* argv);

}  // namespace fusebio
