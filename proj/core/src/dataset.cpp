#include "ewmiv/dataset.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "ewmiv/errors.hpp"
#include "ewmiv/text_config.hpp"

namespace ewmiv {

void Sample::validate() const {
    const int rows = n();
    if (rows < 1) throw ConfigError("sample is empty");
    if (d.size() != rows || x.rows() != rows || z.rows() != rows) {
        throw ConfigError("sample columns have mismatched lengths");
    }
    if (z.cols() < 1) throw ConfigError("sample needs at least one instrument column");
    for (int i = 0; i < rows; ++i) {
        if (d(i) != 0 && d(i) != 1) {
            throw ConfigError("d must be binary; row " + std::to_string(i) + " has " +
                              std::to_string(d(i)));
        }
    }
    if (latent_u) {
        if (latent_u->size() != rows) throw ConfigError("latent_u length mismatch");
        for (int i = 0; i < rows; ++i) {
            const double u = (*latent_u)(i);
            if (u < 0.0 || u > 1.0) {
                throw ConfigError("latent_u outside [0,1] at row " + std::to_string(i));
            }
        }
    }
}

Sample Sample::rows(const std::vector<int>& idx) const {
    Sample out;
    const int m = static_cast<int>(idx.size());
    out.y.resize(m);
    out.d.resize(m);
    out.x.resize(m, x.cols());
    out.z.resize(m, z.cols());
    if (latent_u) out.latent_u = Eigen::VectorXd(m);
    for (int i = 0; i < m; ++i) {
        const int r = idx[static_cast<std::size_t>(i)];
        out.y(i) = y(r);
        out.d(i) = d(r);
        out.x.row(i) = x.row(r);
        out.z.row(i) = z.row(r);
        if (latent_u) (*out.latent_u)(i) = (*latent_u)(r);
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Sample read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty data file: " + path);
    const auto header = split_csv_line(line);

    int n_x = 0, n_z = 0;
    bool has_u = false;
    if (header.size() < 3 || header[0] != "y" || header[1] != "d") {
        throw ConfigError("data header must start with y,d — got '" + line + "'");
    }
    for (std::size_t j = 2; j < header.size(); ++j) {
        const std::string& h = header[j];
        if (h == "u") {
            if (j + 1 != header.size()) throw ConfigError("u column must come last");
            has_u = true;
        } else if (!h.empty() && h[0] == 'x') {
            if (n_z > 0) throw ConfigError("x columns must precede z columns");
            ++n_x;
        } else if (!h.empty() && h[0] == 'z') {
            ++n_z;
        } else {
            throw ConfigError("unexpected data column '" + h + "'");
        }
    }
    if (n_z < 1) throw ConfigError("data needs at least one z column");

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ConfigError("row " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(header.size()));
        }
        std::vector<double> vals;
        vals.reserve(cells.size());
        for (const auto& c : cells) {
            char* end = nullptr;
            vals.push_back(std::strtod(c.c_str(), &end));
            if (end == c.c_str()) {
                throw ConfigError("non-numeric cell '" + c + "' at line " +
                                  std::to_string(lineno));
            }
        }
        rows.push_back(std::move(vals));
    }

    const int n = static_cast<int>(rows.size());
    Sample s;
    s.y.resize(n);
    s.d.resize(n);
    s.x.resize(n, n_x);
    s.z.resize(n, n_z);
    if (has_u) s.latent_u = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        s.y(i) = r[0];
        s.d(i) = static_cast<int>(r[1]);
        for (int j = 0; j < n_x; ++j) s.x(i, j) = r[static_cast<std::size_t>(2 + j)];
        for (int j = 0; j < n_z; ++j) s.z(i, j) = r[static_cast<std::size_t>(2 + n_x + j)];
        if (has_u) (*s.latent_u)(i) = r[static_cast<std::size_t>(2 + n_x + n_z)];
    }
    s.validate();
    return s;
}

void write_sample_csv(const Sample& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write data file: " + path);
    out << "y,d";
    for (int j = 0; j < s.d_x(); ++j) out << ",x" << (j + 1);
    for (int j = 0; j < s.d_z(); ++j) out << ",z" << (j + 1);
    if (s.latent_u) out << ",u";
    out << "\n";
    for (int i = 0; i < s.n(); ++i) {
        out << format_num(s.y(i)) << "," << s.d(i);
        for (int j = 0; j < s.d_x(); ++j) out << "," << format_num(s.x(i, j));
        for (int j = 0; j < s.d_z(); ++j) out << "," << format_num(s.z(i, j));
        if (s.latent_u) out << "," << format_num((*s.latent_u)(i));
        out << "\n";
    }
}

}  // namespace ewmiv
