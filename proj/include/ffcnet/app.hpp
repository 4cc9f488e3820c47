#pragma once

#include "ffcnet/config.hpp"

namespace ffcnet {

// Each command validates the whole config before writing anything and puts
// its outputs under cfg.out_dir.

/// <out>/data/<class>/nnnn.png plus manifest.json.
void cmd_gen_data(const RunConfig& cfg);

/// <out>/cache/{train,val,test}.ffcs holding unshuffled spectra.
void cmd_preprocess(const RunConfig& cfg);

/// checkpoint_best.ffcw, checkpoint_last.ffcw, metrics_history.jsonl and the
/// resolved run_config.ini. Returns the best validation accuracy.
double cmd_train(const RunConfig& cfg);

/// <out>/eval/<split>/: summary.json, confusion_counts.csv,
/// confusion_percent.csv, confusion.svg. Returns accuracy.
double cmd_eval(const RunConfig& cfg);

/// <out>/sweep.csv.
void cmd_sweep(const RunConfig& cfg);

/// <out>/inspect/patch_<q>_{magnitude,phase}.png, one pair per spectral channel.
void cmd_inspect(const RunConfig& cfg);

void run_command(Command command, const RunConfig& cfg);

}  // namespace ffcnet
