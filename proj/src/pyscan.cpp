#include "treegen/pyscan.hpp"

#include <cctype>

namespace treegen {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_fence_line(const std::string& line) {
    std::string t = strip(line);
    return t.rfind("```", 0) == 0;
}

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

}  // namespace

std::vector<std::string> extract_fenced_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    std::vector<std::string> lines = split_lines(text);
    std::string current;
    bool open = false;
    for (const auto& line : lines) {
        if (is_fence_line(line)) {
            if (open) {
                blocks.push_back(current);
                current.clear();
                open = false;
            } else {
                open = true;
            }
            continue;
        }
        if (open) {
            current += line;
            current += '\n';
        }
    }
    if (open && !strip(current).empty()) blocks.push_back(current);  // unclosed trailing fence
    return blocks;
}

std::vector<ScannedFunction> scan_top_level_functions(const std::string& source) {
    std::vector<ScannedFunction> out;
    std::vector<std::string> lines = split_lines(source);

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        std::string head;
        if (line.rfind("def ", 0) == 0)
            head = line.substr(4);
        else if (line.rfind("async def ", 0) == 0)
            head = line.substr(10);
        else
            continue;

        std::size_t paren = head.find('(');
        if (paren == std::string::npos) continue;
        std::string name = strip(head.substr(0, paren));
        if (!is_identifier(name)) continue;

        // Collect the signature, possibly spanning lines, up to the ':' that
        // closes the def header. Quoted strings are skipped so parens in
        // default arguments don't confuse the balance.
        std::string sig;
        int depth_parens = 0;
        bool done = false;
        std::size_t j = i;
        std::size_t pos = (line.size() - head.size()) + paren;
        while (j < lines.size() && !done) {
            const std::string& l = lines[j];
            for (std::size_t k = (j == i ? pos : 0); k < l.size(); ++k) {
                char c = l[k];
                if (c == '\'' || c == '"') {
                    char quote = c;
                    sig += c;
                    ++k;
                    while (k < l.size() && l[k] != quote) {
                        sig += l[k];
                        if (l[k] == '\\' && k + 1 < l.size()) sig += l[++k];
                        ++k;
                    }
                    if (k < l.size()) sig += l[k];
                    continue;
                }
                if (c == '(') ++depth_parens;
                if (c == ')') --depth_parens;
                if (c == ':' && depth_parens == 0) {
                    done = true;
                    break;
                }
                sig += c;
            }
            if (!done) {
                sig += ' ';
                ++j;
            }
        }

        ScannedFunction fn;
        fn.name = name;
        fn.signature = strip(sig);
        fn.line = i + 1;

        // Docstring: the first statement in the body, when it is a string
        // literal opened with triple quotes.
        std::size_t body = j + 1;
        while (body < lines.size() && strip(lines[body]).empty()) ++body;
        if (body < lines.size()) {
            std::string t = strip(lines[body]);
            for (const char* q : {"\"\"\"", "'''"}) {
                if (t.rfind(q, 0) != 0) continue;
                std::string rest = t.substr(3);
                std::size_t close = rest.find(q);
                if (close != std::string::npos) {
                    fn.docstring = strip(rest.substr(0, close));
                } else {
                    std::string doc = rest;
                    for (std::size_t m = body + 1; m < lines.size(); ++m) {
                        std::size_t end = lines[m].find(q);
                        if (end != std::string::npos) {
                            doc += "\n" + lines[m].substr(0, end);
                            break;
                        }
                        doc += "\n" + lines[m];
                    }
                    fn.docstring = strip(doc);
                }
                break;
            }
        }
        out.push_back(std::move(fn));
    }
    return out;
}

int count_assertions(const std::string& source) {
    int count = 0;
    for (const auto& line : split_lines(source)) {
        std::string t = strip(line);
        if (t == "assert" || t.rfind("assert ", 0) == 0 || t.rfind("assert(", 0) == 0) ++count;
    }
    return count;
}

std::optional<std::size_t> deepest_frame_line(const std::string& stderr_text,
                                              const std::string& filename) {
    // Frames print the script path as the interpreter resolved it, so match
    // both a bare filename and any path ending in /<filename>.
    const std::string opener = "File \"";
    std::optional<std::size_t> deepest;
    std::size_t pos = 0;
    while ((pos = stderr_text.find(opener, pos)) != std::string::npos) {
        pos += opener.size();
        const std::size_t quote = stderr_text.find('"', pos);
        if (quote == std::string::npos) break;
        const std::string path = stderr_text.substr(pos, quote - pos);
        pos = quote + 1;
        const bool matches = path == filename ||
                             (path.size() > filename.size() &&
                              path.compare(path.size() - filename.size(), filename.size(),
                                           filename) == 0 &&
                              path[path.size() - filename.size() - 1] == '/');
        if (!matches) continue;
        const std::string line_marker = ", line ";
        if (stderr_text.compare(pos, line_marker.size(), line_marker) != 0) continue;
        pos += line_marker.size();
        std::size_t end = pos;
        while (end < stderr_text.size() &&
               std::isdigit(static_cast<unsigned char>(stderr_text[end])))
            ++end;
        if (end > pos) deepest = std::stoull(stderr_text.substr(pos, end - pos));
        pos = end;
    }
    return deepest;
}

}  // namespace treegen
