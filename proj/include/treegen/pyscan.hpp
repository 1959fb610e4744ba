#pragma once

#include <optional>
#include <string>
#include <vector>

namespace treegen {

// Contents of every fenced code block (``` ... ```) in reply text, in
// order. Language tags on the opening fence are ignored. An unclosed final
// fence counts as a block running to end of text.
std::vector<std::string> extract_fenced_blocks(const std::string& text);

// A top-level function definition found in generated source.
struct ScannedFunction {
    std::string name;
    std::string signature;  // "(a, b) -> int", everything after the name up to the colon
    std::string docstring;  // empty when the function has none
    std::size_t line = 0;   // 1-based line of the def keyword
};

// Top-level `def` / `async def` statements (column 0 only), in order.
std::vector<ScannedFunction> scan_top_level_functions(const std::string& source);

// Number of `assert` statements (any indentation) in a test block.
int count_assertions(const std::string& source);

// Line number (1-based, within the executed file) of the deepest stack
// frame a Python traceback reports for `filename`. Used to attribute a
// runtime error to the candidate region vs the test region of the file.
std::optional<std::size_t> deepest_frame_line(const std::string& stderr_text,
                                              const std::string& filename);

}  // namespace treegen
