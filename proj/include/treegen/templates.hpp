#pragma once

#include <string>
#include <vector>

namespace treegen {

// Compiled-in copy of templates/<key>.txt, where key is the file stem
// ("decompose_system", "critic_user", ...). Throws Error for unknown keys.
const std::string& template_text(const std::string& key);

// All embedded template keys, sorted.
std::vector<std::string> template_keys();

}  // namespace treegen
