#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zoomrl/episode.hpp"
#include "zoomrl/policy.hpp"
#include "zoomrl/videoworld.hpp"

namespace zoomrl {

enum class RecordOrigin { kExemplar, kReflection };
enum class DropReason { kWrongAnswer, kFormat, kPolicyFailure, kReflectionFailed };

std::string_view record_origin_name(RecordOrigin origin);
std::string_view drop_reason_name(DropReason reason);

struct CurationRecord {
    Trajectory trajectory;
    RecordOrigin origin = RecordOrigin::kExemplar;
    bool kept = false;
    std::optional<DropReason> drop_reason;
    std::string expert_id;
};

struct CurationConfig {
    EpisodeConfig episode;
    int reflect_retries = 1;   // extra attempts when the corrected call fails
    double mix_ratio = 3.0;    // exported exemplar:reflection cap
};

// Run the expert over the corpus and keep only trajectories that verify
// against the dense oracle and the format rules. Wrong or malformed outputs
// are dropped with reasons; per-task policy faults never abort the batch.
std::vector<CurationRecord> distill_exemplars(Policy& expert, const std::vector<Task>& tasks,
                                              const CurationConfig& config);

// Tasks on which the student's final answer was wrong, paired with the failed
// trajectory (index into `tasks`).
std::vector<std::pair<std::size_t, Trajectory>> mine_failures(Policy& student,
                                                              const std::vector<Task>& tasks,
                                                              const CurationConfig& config);

// The two-turn corrected interaction: reflection text + fixed tool call, then
// analysis + answer after the tool response. The exported record keeps only
// the corrected flow; the failed attempt conditions the expert but is not
// retained in the sample.
CurationRecord reflect(Policy& expert, const Task& task, const Trajectory& failed,
                       const CurationConfig& config);

struct CorpusStats {
    std::size_t records = 0;
    std::map<std::string, std::size_t> origin_counts;
    std::map<int, std::size_t> round_hist;             // tool calls -> records
    std::map<std::string, std::size_t> length_hist;    // char-length bin -> records
};

// Write KEPT records as SFT-ready JSONL conversations with per-message
// trainable flags, plus corpus statistics. Output is byte-stable: records are
// ordered by task id and serialized deterministically.
CorpusStats export_sft(const std::vector<CurationRecord>& records, const std::string& sft_path,
                       const std::string& stats_path, const CurationConfig& config);

// Record persistence (JSONL).
std::string record_to_json(const CurationRecord& record);
CurationRecord record_from_json(const std::string& line);
std::vector<CurationRecord> load_records(const std::string& path);
void save_records(const std::vector<CurationRecord>& records, const std::string& path);

}  // namespace zoomrl
