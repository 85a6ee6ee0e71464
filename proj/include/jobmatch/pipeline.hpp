#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jobmatch/classifier.hpp"
#include "jobmatch/config.hpp"
#include "jobmatch/embedding.hpp"

namespace jobmatch {

// Raised when a stage runs before the stage that produces its inputs.
class MissingArtifact : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Stage entry points. Each reads its inputs below cfg.output (or the corpus
// paths), writes its artifacts plus <stage>/manifest.json, and reports
// progress and warnings to log.
void cmd_ingest(const PipelineConfig& cfg, std::ostream& log);
void cmd_pairs(const PipelineConfig& cfg, std::ostream& log);
void cmd_train(const PipelineConfig& cfg, std::ostream& log);
void cmd_embed(const PipelineConfig& cfg, std::ostream& log);
void cmd_rank(const PipelineConfig& cfg, std::ostream& log);
void cmd_eval(const PipelineConfig& cfg, std::ostream& log);
void cmd_analyze(const PipelineConfig& cfg, std::ostream& log);
// ingest through eval, then analyze when an entity file is configured.
void cmd_run(const PipelineConfig& cfg, std::ostream& log);

struct GridCell {
  std::size_t index = 0;
  KeyValues overrides;
  std::string label;  // "k1=v1;k2=v2" in key order
};

// Cartesian product of cfg.grid in key order, last key varying fastest.
std::vector<GridCell> grid_cells(const PipelineConfig& cfg);

struct LeaderboardRow {
  GridCell cell;
  bool ok = false;
  double dev_map = 0.0;
  std::size_t parameters = 0;
  std::string error;
};

struct GridResult {
  std::vector<LeaderboardRow> leaderboard;  // sorted; failed cells last
  std::optional<std::size_t> best;          // index into leaderboard
};

// Runs every cell under <output>/grid/cell_NNN with up to `jobs` cells at a
// time and writes reports/leaderboard.{tsv,json}. Cells are ranked by dev MAP
// on cfg.select_lang (overall MAP when that language is not evaluated), then
// fewer parameters, then label.
GridResult cmd_gridsearch(const PipelineConfig& cfg, std::size_t jobs, std::ostream& log);

// Model checkpoints in the embedding exchange format under <dir>: the
// projection as encoder.{f32,json,ids.txt} (one row per hash bucket) plus
// encoder_params.json, and for the pair classifier head.{f32,json,ids.txt}
// (rows "unrelated" and "related": 4d weights then the bias).
void save_encoder(const ToyEncoderParams& p, const std::filesystem::path& dir);
ToyEncoderParams load_encoder(const std::filesystem::path& dir);
void save_pair_scorer(const PairScorerParams& p, const std::filesystem::path& dir);
PairScorerParams load_pair_scorer(const std::filesystem::path& dir);

}  // namespace jobmatch
