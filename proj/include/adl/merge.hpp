#pragma once

#include <string>
#include <vector>

namespace adl {

struct MergeResult {
  std::string text;
  bool conflict = false;
};

/// Lines with their terminators, so joining them restores the text exactly.
std::vector<std::string> split_lines(const std::string& text);

/// Line-level three-way merge over longest-common-subsequence matchings.
/// Overlapping divergent edits are emitted between conflict markers.
MergeResult merge3(const std::string& base, const std::string& ours, const std::string& theirs,
                   const std::string& ours_label = "ours",
                   const std::string& theirs_label = "theirs");

/// Fallback without a common ancestor: shared lines are kept, every
/// difference is a conflict hunk, and the result is always flagged.
MergeResult merge2(const std::string& ours, const std::string& theirs,
                   const std::string& ours_label = "ours",
                   const std::string& theirs_label = "theirs");

}  // namespace adl
