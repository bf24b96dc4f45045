#include "cogdiag/io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cogdiag/error.hpp"

namespace cogdiag {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

/// Reads non-empty lines, tolerating CRLF input.
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open " + path.string());
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string line;
    std::size_t number = 0;
    while (std::getline(file, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.emplace_back(number, line);
    }
    return lines;
}

int parse_score(const std::string& text, std::size_t line) {
    if (text == "0") return 0;
    if (text == "1") return 1;
    throw ValidationError("score must be 0 or 1, got '" + text + "' (line " + std::to_string(line) + ")");
}

struct Indexer {
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t intern(const std::string& id) {
        auto [it, inserted] = index.try_emplace(id, ids.size());
        if (inserted) ids.push_back(id);
        return it->second;
    }
};

ResponseMatrix load_long(const std::filesystem::path& path, DuplicatePolicy duplicates) {
    auto lines = read_lines(path);
    if (lines.empty()) throw ParseError("empty responses file: " + path.string());
    if (split_fields(lines.front().second) != std::vector<std::string>{"student_id", "question_id", "score"})
        throw ParseError("expected header student_id,question_id,score", lines.front().first);

    struct Row {
        std::size_t student, question;
        int score;
    };
    Indexer students, questions;
    std::vector<Row> rows;
    std::unordered_map<std::uint64_t, std::size_t> seen;  // (student,question) -> first line
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto& [number, line] = lines[r];
        auto fields = split_fields(line);
        if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), number);
        if (fields[0].empty()) throw ValidationError("empty student_id (line " + std::to_string(number) + ")");
        if (fields[1].empty()) throw ValidationError("empty question_id (line " + std::to_string(number) + ")");
        const int score = parse_score(fields[2], number);
        const std::size_t i = students.intern(fields[0]);
        const std::size_t j = questions.intern(fields[1]);
        const std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | j;
        if (auto it = seen.find(key); it != seen.end()) {
            if (duplicates == DuplicatePolicy::Strict)
                throw ValidationError("duplicate response for (" + fields[0] + ", " + fields[1] +
                                      "), first seen at line " + std::to_string(it->second) +
                                      " (line " + std::to_string(number) + ")");
            continue;  // lenient: first occurrence wins
        }
        seen.emplace(key, number);
        rows.push_back({i, j, score});
    }

    ResponseMatrix matrix(students.ids, questions.ids);
    for (const auto& row : rows)
        matrix.set(row.student, row.question, row.score ? Cell::Correct : Cell::Incorrect);
    matrix.validate();
    return matrix;
}

ResponseMatrix load_wide(const std::filesystem::path& path, DuplicatePolicy duplicates) {
    auto lines = read_lines(path);
    if (lines.empty()) throw ParseError("empty responses file: " + path.string());
    auto header = split_fields(lines.front().second);
    if (header.size() < 2 || header[0] != "student_id")
        throw ParseError("expected header student_id,<question ids...>", lines.front().first);
    std::vector<std::string> question_ids(header.begin() + 1, header.end());

    std::vector<std::string> student_ids;
    std::vector<std::vector<Cell>> grid;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto& [number, line] = lines[r];
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             number);
        if (fields[0].empty()) throw ValidationError("empty student_id (line " + std::to_string(number) + ")");
        if (seen.contains(fields[0])) {
            if (duplicates == DuplicatePolicy::Strict)
                throw ValidationError("duplicate student row " + fields[0] + " (line " +
                                      std::to_string(number) + ")");
            continue;
        }
        seen.emplace(fields[0], number);
        std::vector<Cell> row(question_ids.size());
        for (std::size_t j = 0; j < question_ids.size(); ++j) {
            const std::string& cell = fields[j + 1];
            if (cell == "NA")
                row[j] = Cell::Unobserved;
            else
                row[j] = parse_score(cell, number) ? Cell::Correct : Cell::Incorrect;
        }
        student_ids.push_back(fields[0]);
        grid.push_back(std::move(row));
    }

    ResponseMatrix matrix(student_ids, question_ids);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < question_ids.size(); ++j) matrix.set(i, j, grid[i][j]);
    matrix.validate();
    return matrix;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!file) throw ParseError("cannot write " + path.string());
    return file;
}

}  // namespace

ResponseMatrix load_responses(const std::filesystem::path& path, ResponseFormat format,
                              DuplicatePolicy duplicates) {
    return format == ResponseFormat::CsvLong ? load_long(path, duplicates)
                                             : load_wide(path, duplicates);
}

void save_responses(const ResponseMatrix& responses, const std::filesystem::path& path,
                    ResponseFormat format) {
    auto file = open_for_write(path);
    if (format == ResponseFormat::CsvLong) {
        file << "student_id,question_id,score\n";
        for (std::size_t i = 0; i < responses.student_count(); ++i)
            for (std::size_t j = 0; j < responses.question_count(); ++j) {
                const Cell cell = responses.at(i, j);
                if (cell == Cell::Unobserved) continue;
                file << responses.student_ids()[i] << ',' << responses.question_ids()[j] << ','
                     << (cell == Cell::Correct ? '1' : '0') << '\n';
            }
    } else {
        file << "student_id";
        for (const auto& id : responses.question_ids()) file << ',' << id;
        file << '\n';
        for (std::size_t i = 0; i < responses.student_count(); ++i) {
            file << responses.student_ids()[i];
            for (std::size_t j = 0; j < responses.question_count(); ++j) {
                switch (responses.at(i, j)) {
                    case Cell::Correct: file << ",1"; break;
                    case Cell::Incorrect: file << ",0"; break;
                    case Cell::Unobserved: file << ",NA"; break;
                }
            }
            file << '\n';
        }
    }
}

QMatrix load_qmatrix(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw ParseError("empty Q-matrix file: " + path.string());
    auto header = split_fields(lines.front().second);
    if (header.size() < 2 || header[0] != "question_id")
        throw ParseError("expected header question_id,<skill ids...>", lines.front().first);
    std::vector<std::string> skill_ids(header.begin() + 1, header.end());

    std::vector<std::string> question_ids;
    std::vector<BitVec> rows;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto& [number, line] = lines[r];
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             number);
        BitVec row(skill_ids.size());
        for (std::size_t k = 0; k < skill_ids.size(); ++k) {
            const std::string& cell = fields[k + 1];
            if (cell != "0" && cell != "1")
                throw ValidationError("Q-matrix cell must be 0 or 1, got '" + cell + "' (line " +
                                      std::to_string(number) + ")");
            row[k] = cell == "1";
        }
        question_ids.push_back(fields[0]);
        rows.push_back(std::move(row));
    }
    return make_qmatrix(std::move(rows), std::move(question_ids), std::move(skill_ids));
}

void save_qmatrix(const QMatrix& q, const std::filesystem::path& path) {
    auto file = open_for_write(path);
    file << "question_id";
    for (const auto& id : q.skill_ids) file << ',' << id;
    file << '\n';
    for (std::size_t j = 0; j < q.question_count(); ++j) {
        file << q.question_ids[j];
        for (auto b : q.rows[j]) file << ',' << (b ? '1' : '0');
        file << '\n';
    }
}

QMatrix align_qmatrix(const QMatrix& q, const ResponseMatrix& responses) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t j = 0; j < q.question_count(); ++j) by_id.emplace(q.question_ids[j], j);

    QMatrix aligned;
    aligned.skill_ids = q.skill_ids;
    for (const auto& id : responses.question_ids()) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ValidationError("question " + id + " has responses but no Q-matrix row");
        aligned.rows.push_back(q.rows[it->second]);
        aligned.question_ids.push_back(id);
    }
    aligned.validate();
    return aligned;
}

}  // namespace cogdiag
