#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adl/schema.hpp"

namespace adl {

struct LoadReport {
  std::vector<std::string> types;
  std::vector<std::string> events;
  std::vector<std::string> methods;  // free methods
  std::vector<std::string> processes;
  std::vector<std::string> partitions;
  std::vector<std::string> warnings;

  bool empty() const {
    return types.empty() && events.empty() && methods.empty() && processes.empty() &&
           partitions.empty();
  }
};

/// Parses a schema DSL text and registers every declaration in `schema`.
/// All or nothing: on error the schema is left untouched.
LoadReport load_dsl(Schema& schema, std::string_view text,
                    const std::string& partition = Schema::kRoot);

}  // namespace adl
