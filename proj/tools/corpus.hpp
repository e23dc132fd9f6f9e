#pragma once

#include "manifest.hpp"

#include <string>
#include <vector>

namespace sodeform {

struct CorpusEntry {
  std::string name;
  std::string summary;
};

std::vector<CorpusEntry> corpus_list();

/// Throws sode::InputError for unknown names.
Manifest corpus_get(const std::string& name);

}  // namespace sodeform
