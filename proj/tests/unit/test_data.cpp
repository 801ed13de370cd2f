#include <doctest.h>

#include "orthodid/data.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using namespace orthodid;

namespace {

ColumnMap ro_map() {
    ColumnMap m;
    m.roles = {{"y_pre", "y0"}, {"y_post", "y1"}, {"treat", "d"}};
    return m;
}

LoadResult read(const std::string& text, Design design, const ColumnMap& map) {
    std::istringstream in(text);
    return read_dataset(in, design, map);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("make_folds partitions six indices into three pairs") {
    const FoldPlan plan = make_folds(6, 3, 7);
    CHECK(plan.k == 3);
    CHECK(plan.fold_sizes() == std::vector<Eigen::Index>{2, 2, 2});
    std::set<Eigen::Index> seen;
    for (int f = 0; f < 3; ++f) {
        for (auto i : plan.fold(f)) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("make_folds with n = 7, k = 3 gives sizes {3, 2, 2}") {
    auto sizes = make_folds(7, 3, 1).fold_sizes();
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<Eigen::Index>{2, 2, 3});
}

TEST_CASE("make_folds is deterministic in its seed") {
    CHECK(make_folds(6, 3, 7).assignment == make_folds(6, 3, 7).assignment);
    CHECK(make_folds(100, 5, 7).assignment != make_folds(100, 5, 8).assignment);
}

TEST_CASE("make_folds rejects k < 2 and k > n") {
    CHECK_THROWS_AS(make_folds(10, 1, 0), ConfigError);
    CHECK_THROWS_AS(make_folds(3, 4, 0), ConfigError);
}

TEST_CASE("fold partition property holds exhaustively up to 10^4") {
    for (Eigen::Index n : {2, 3, 17, 100, 999, 10000}) {
        for (int k : {2, 3, 5, 10}) {
            if (k > n) continue;
            const FoldPlan plan = make_folds(n, k, static_cast<std::uint64_t>(n * 31 + k));
            std::vector<int> hits(static_cast<std::size_t>(n), 0);
            Eigen::Index lo = n;
            Eigen::Index hi = 0;
            for (int f = 0; f < k; ++f) {
                const auto fold = plan.fold(f);
                lo = std::min<Eigen::Index>(lo, static_cast<Eigen::Index>(fold.size()));
                hi = std::max<Eigen::Index>(hi, static_cast<Eigen::Index>(fold.size()));
                for (auto i : fold) ++hits[static_cast<std::size_t>(i)];
                // the complement is exactly everything else
                CHECK(static_cast<Eigen::Index>(plan.complement(f).size() + fold.size()) == n);
            }
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("four-row repeated-outcomes CSV loads with N = 4, p = 1") {
    const auto res = read("y0,y1,d,x1\n1,2,0,0.5\n2,3.5,1,-1\n0,1,0,2\n3,7,1,0\n", Design::RepeatedOutcomes, ro_map());
    const auto& d = std::get<RepeatedOutcomesData>(res.dataset);
    CHECK(d.size() == 4);
    CHECK(d.x.cols() == 1);
    CHECK(d.x.column_names == std::vector<std::string>{"x1"});
    CHECK(d.y_post(1) == 3.5);
    CHECK(d.d(1) == 1);
    CHECK(d.delta_y()(3) == 4.0);
    CHECK(res.rows_read == 4);
    CHECK(res.rows_rejected == 0);
}

TEST_CASE("treatment value 2 is an indicator out of range") {
    try {
        read("y0,y1,d,x1\n1,2,0,0\n1,2,2,0\n1,2,1,0\n", Design::RepeatedOutcomes, ro_map());
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("indicator out of range") != std::string::npos);
    }
}

TEST_CASE("multilevel CSV with w in {0,1,2} has J = 2") {
    ColumnMap m;
    m.roles = {{"y_pre", "a"}, {"y_post", "b"}, {"level", "w"}};
    const auto res = read("a,b,w,x\n0,1,0,1\n0,2,1,2\n0,3,2,3\n0,1,0,4\n", Design::Multilevel, m);
    const auto& d = std::get<MultilevelData>(res.dataset);
    CHECK(d.levels == 2);
    CHECK(d.size() == 4);
}

TEST_CASE("multilevel levels must be non-negative integers") {
    ColumnMap m;
    m.roles = {{"y_pre", "a"}, {"y_post", "b"}, {"level", "w"}};
    CHECK_THROWS_AS(read("a,b,w\n0,1,0\n0,2,1.5\n", Design::Multilevel, m), DataError);
    CHECK_THROWS_AS(read("a,b,w\n0,1,0\n0,2,-1\n", Design::Multilevel, m), DataError);
}

TEST_CASE("rows with missing values are rejected and counted") {
    const auto res = read("y0,y1,d,x1\n1,2,0,0\n1,NA,1,0\n1,2,1,\n1,3,1,1\n0,0,0,nan\n", Design::RepeatedOutcomes,
                          ro_map());
    CHECK(std::get<RepeatedOutcomesData>(res.dataset).size() == 2);
    CHECK(res.rows_read == 5);
    CHECK(res.rows_rejected == 3);
}

TEST_CASE("loader errors") {
    SUBCASE("non-numeric cell") {
        CHECK_THROWS_AS(read("y0,y1,d,x1\n1,abc,0,0\n1,2,1,0\n", Design::RepeatedOutcomes, ro_map()), DataError);
    }
    SUBCASE("missing role mapping") {
        ColumnMap m = ro_map();
        m.roles.erase("treat");
        CHECK_THROWS_AS(read("y0,y1,d\n1,2,0\n1,2,1\n", Design::RepeatedOutcomes, m), ConfigError);
    }
    SUBCASE("role column not in the file") {
        CHECK_THROWS_AS(read("y0,y1,z\n1,2,0\n1,2,1\n", Design::RepeatedOutcomes, ro_map()), DataError);
    }
    SUBCASE("two roles on one column") {
        ColumnMap m = ro_map();
        m.roles["y_post"] = "y0";
        CHECK_THROWS_AS(read("y0,y1,d\n1,2,0\n1,2,1\n", Design::RepeatedOutcomes, m), ConfigError);
    }
    SUBCASE("role column listed as covariate") {
        ColumnMap m = ro_map();
        m.covariates = {"d"};
        CHECK_THROWS_AS(read("y0,y1,d\n1,2,0\n1,2,1\n", Design::RepeatedOutcomes, m), ConfigError);
    }
    SUBCASE("duplicate header") {
        CHECK_THROWS_AS(read("y0,y1,d,d\n1,2,0,0\n1,2,1,1\n", Design::RepeatedOutcomes, ro_map()), DataError);
    }
    SUBCASE("single treatment arm") {
        CHECK_THROWS_AS(read("y0,y1,d\n1,2,0\n1,2,0\n", Design::RepeatedOutcomes, ro_map()), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv", Design::RepeatedOutcomes, ro_map()), DataError);
    }
}

TEST_CASE("explicit covariate list selects and orders columns") {
    ColumnMap m = ro_map();
    m.covariates = {"x2", "x1"};
    const auto res = read("y0,y1,d,x1,x2,label\n1,2,0,1,10,a\n1,2,1,2,20,b\n", Design::RepeatedOutcomes, m);
    const auto& d = std::get<RepeatedOutcomesData>(res.dataset);
    CHECK(d.x.column_names == std::vector<std::string>{"x2", "x1"});
    CHECK(d.x.values(1, 0) == 20.0);
}

TEST_CASE("non-numeric columns are skipped when covariates are implicit") {
    const auto res = read("y0,y1,d,x1,label\n1,2,0,1,a\n1,2,1,2,b\n", Design::RepeatedOutcomes, ro_map());
    CHECK(std::get<RepeatedOutcomesData>(res.dataset).x.cols() == 1);
}

TEST_CASE("parse_csv handles quotes, doubled quotes and CRLF") {
    std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,2,3\r\n");
    const auto rows = parse_csv(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "b,c");
    CHECK(rows[0][2] == "say \"hi\"");
    CHECK(rows[1][2] == "3");
}

TEST_CASE("write then read reproduces every design bit for bit") {
    MatrixXd x(4, 2);
    x << 0.1, 1.0 / 3.0, -2.5e-7, 4.0, 1e10, -0.0, 3.14159265358979, 2.718281828459045;
    SUBCASE("repeated outcomes") {
        RepeatedOutcomesData d{VectorXd::LinSpaced(4, 0.3, 1.7), VectorXd::LinSpaced(4, -1.0 / 7.0, 9.0),
                               (VectorXi(4) << 0, 1, 0, 1).finished(), CovariateMatrix(x, {"a", "b"})};
        std::stringstream s;
        write_csv(s, d);
        ColumnMap m;
        m.roles = {{"y_pre", "y_pre"}, {"y_post", "y_post"}, {"treat", "d"}};
        const auto back = std::get<RepeatedOutcomesData>(read_dataset(s, Design::RepeatedOutcomes, m).dataset);
        CHECK(back.y_pre == d.y_pre);
        CHECK(back.y_post == d.y_post);
        CHECK(back.d == d.d);
        CHECK(back.x.values == d.x.values);
        CHECK(back.x.column_names == d.x.column_names);
    }
    SUBCASE("cross sections") {
        RepeatedCrossSectionData d{VectorXd::LinSpaced(4, 0.3, 1.7), (VectorXi(4) << 1, 0, 0, 1).finished(),
                                   (VectorXi(4) << 0, 1, 0, 1).finished(), CovariateMatrix(x)};
        std::stringstream s;
        write_csv(s, d);
        ColumnMap m;
        m.roles = {{"y", "y"}, {"time", "t"}, {"treat", "d"}};
        const auto back = std::get<RepeatedCrossSectionData>(read_dataset(s, Design::RepeatedCrossSection, m).dataset);
        CHECK(back.y == d.y);
        CHECK(back.t == d.t);
        CHECK(back.x.values == d.x.values);
    }
    SUBCASE("multilevel") {
        MultilevelData d{VectorXd::LinSpaced(4, 0.3, 1.7), VectorXd::LinSpaced(4, 2.0, 3.0),
                         (VectorXi(4) << 0, 1, 2, 0).finished(), CovariateMatrix(x), 2};
        std::stringstream s;
        write_csv(s, d);
        ColumnMap m;
        m.roles = {{"y_pre", "y_pre"}, {"y_post", "y_post"}, {"level", "w"}};
        const auto back = std::get<MultilevelData>(read_dataset(s, Design::Multilevel, m).dataset);
        CHECK(back.w == d.w);
        CHECK(back.levels == 2);
        CHECK(back.y_post == d.y_post);
    }
}

TEST_CASE("validation of in-memory datasets") {
    RepeatedOutcomesData d{VectorXd::Zero(3), VectorXd::Zero(2), (VectorXi(3) << 0, 1, 0).finished(),
                           CovariateMatrix(MatrixXd::Zero(3, 1))};
    CHECK_THROWS_AS(d.validate(), DataError);
    MatrixXd bad = MatrixXd::Zero(2, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(CovariateMatrix{bad}, DataError);
    MultilevelData m{VectorXd::Zero(3), VectorXd::Zero(3), (VectorXi(3) << 0, 2, 0).finished(),
                     CovariateMatrix(MatrixXd::Zero(3, 1)), 2};
    CHECK_THROWS_AS(m.validate(), DataError);  // level 1 absent
}

}  // TEST_SUITE
