#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "supcfa/dataset.hpp"
#include "test_util.hpp"

using namespace supcfa;
using supcfa::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string record(const std::vector<double>& img, const std::vector<double>& txt, int cls) {
    auto arr = [](const std::vector<double>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s + "]";
    };
    return "{\"image\":" + arr(img) + ",\"text\":" + arr(txt) + ",\"class\":" + std::to_string(cls) + "}\n";
}

std::string error_of(const auto& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.n = 60;
    s.d_image = 9;
    s.d_text = 7;
    s.num_classes = 3;
    s.shared_dim = 4;
    s.noise_sigma = 0.2;
    s.seed = 17;
    return s;
}

} // namespace

TEST_CASE("load jsonl with three records") {
    TempDir dir;
    write(dir / "d.jsonl", record({1, 2}, {3}, 0) + record({4, 5}, {6}, 1) + "\n" + record({7, 8}, {9}, 0));
    const Dataset d = load_dataset(dir / "d.jsonl", DatasetFormat::jsonl);
    CHECK(d.size() == 3);
    CHECK(d.num_classes() == 2);
    CHECK(d.d_image() == 2);
    CHECK(d.d_text() == 1);
    CHECK(d[0].label == std::vector<int>{+1, -1});
    CHECK(d[1].label == std::vector<int>{-1, +1});
    CHECK(d.class_indices() == std::vector<std::size_t>{0, 1, 0});
    CHECK(d.label_matrix() == Matrix{{1, -1}, {-1, 1}, {1, -1}});
}

TEST_CASE("external class ids are sorted before indexing") {
    TempDir dir;
    write(dir / "d.jsonl", record({1}, {1}, 7) + record({2}, {2}, 3) + record({3}, {3}, 7));
    const Dataset d = load_dataset(dir / "d.jsonl", DatasetFormat::jsonl);
    CHECK(d.class_ids() == std::vector<std::int64_t>{3, 7});
    CHECK(d.class_indices() == std::vector<std::size_t>{1, 0, 1});
}

TEST_CASE("load errors") {
    TempDir dir;
    SUBCASE("empty file") {
        write(dir / "e.jsonl", "");
        CHECK(error_of([&] { load_dataset(dir / "e.jsonl", DatasetFormat::jsonl); }) == "empty dataset");
        write(dir / "blank.jsonl", "\n\n");
        CHECK(error_of([&] { load_dataset(dir / "blank.jsonl", DatasetFormat::jsonl); }) == "empty dataset");
    }
    SUBCASE("record 5 with the wrong image length") {
        std::string text;
        for (int i = 0; i < 8; ++i) text += record(std::vector<double>(i == 5 ? 10 : 12, 0.5), {1.0, 2.0}, i % 2);
        write(dir / "bad.jsonl", text);
        const std::string msg = error_of([&] { load_dataset(dir / "bad.jsonl", DatasetFormat::jsonl); });
        CHECK(msg.find("record 5") != std::string::npos);
        CHECK(msg.find("10") != std::string::npos);
        CHECK(msg.find("12") != std::string::npos);
    }
    SUBCASE("malformed json") {
        write(dir / "m.jsonl", record({1}, {1}, 0) + "{not json\n");
        CHECK(error_of([&] { load_dataset(dir / "m.jsonl", DatasetFormat::jsonl); }).find("record 1") !=
              std::string::npos);
    }
    SUBCASE("missing file") {
        CHECK_THROWS(load_dataset(dir / "nope.jsonl", DatasetFormat::jsonl));
    }
    SUBCASE("unknown format name") {
        CHECK_THROWS_AS(parse_dataset_format("parquet"), std::invalid_argument);
        CHECK(parse_dataset_format("csv-pair") == DatasetFormat::csv_pair);
        CHECK(parse_dataset_format("jsonl") == DatasetFormat::jsonl);
    }
}

TEST_CASE("dataset construction validates labels and features") {
    CHECK(error_of([] { Dataset({}, 1, 1, 2); }) == "empty dataset");
    Document bad{{1.0}, {1.0}, {1, 1}};
    CHECK_THROWS_AS(Dataset({bad}, 1, 1, 2), std::invalid_argument);
    Document nan_doc{{NAN}, {1.0}, {1, -1}};
    CHECK_THROWS_AS(Dataset({nan_doc}, 1, 1, 2), std::invalid_argument);
    Document wrong_dim{{1.0, 2.0}, {1.0}, {1, -1}};
    CHECK_THROWS_AS(Dataset({wrong_dim}, 1, 1, 2), std::invalid_argument);
}

TEST_CASE("jsonl and csv-pair round trips are exact") {
    TempDir dir;
    const Dataset d = generate_synthetic(small_spec());
    save_dataset_jsonl(d, dir / "d.jsonl");
    const Dataset a = load_dataset(dir / "d.jsonl", DatasetFormat::jsonl);
    save_dataset_csv_pair(d, dir / "pair");
    CHECK(std::filesystem::exists(dir / "pair.image.csv"));
    CHECK(std::filesystem::exists(dir / "pair.text.csv"));
    const Dataset b = load_dataset(dir / "pair", DatasetFormat::csv_pair);
    for (const Dataset* loaded : {&a, &b}) {
        REQUIRE(loaded->size() == d.size());
        CHECK(loaded->image_matrix() == d.image_matrix());
        CHECK(loaded->text_matrix() == d.text_matrix());
        CHECK(loaded->class_indices() == d.class_indices());
    }
}

TEST_CASE("csv-pair with mismatched row counts is rejected") {
    TempDir dir;
    write(dir / "p.image.csv", "class,f0\n0,1.0\n1,2.0\n");
    write(dir / "p.text.csv", "g0\n1.0\n");
    CHECK_THROWS(load_dataset(dir / "p", DatasetFormat::csv_pair));
}

TEST_CASE("generate_synthetic") {
    SUBCASE("same seed gives the same dataset") {
        const Dataset a = generate_synthetic(small_spec());
        const Dataset b = generate_synthetic(small_spec());
        CHECK(a.image_matrix() == b.image_matrix());
        CHECK(a.text_matrix() == b.text_matrix());
        CHECK(a.class_indices() == b.class_indices());
        SyntheticSpec other = small_spec();
        other.seed = 18;
        CHECK_FALSE(generate_synthetic(other).image_matrix() == a.image_matrix());
    }
    SUBCASE("round-robin class counts") {
        SyntheticSpec s = small_spec();
        s.n = 200;
        s.num_classes = 4;
        s.noise_sigma = 0.1;
        CHECK(generate_synthetic(s).class_counts() == std::vector<std::size_t>{50, 50, 50, 50});
    }
    SUBCASE("noiseless modalities are linear images of a shared_dim latent") {
        SyntheticSpec s = small_spec();
        s.noise_sigma = 0.0;
        const Dataset d = generate_synthetic(s);
        const auto si = svd(d.image_matrix()).singular_values;
        const auto st = svd(d.text_matrix()).singular_values;
        CHECK(si[s.shared_dim - 1] > 1e-3);
        CHECK(si[s.shared_dim] <= 1e-10 * si[0]);
        CHECK(st[s.shared_dim] <= 1e-10 * st[0]);
    }
    SUBCASE("invalid specs") {
        SyntheticSpec s = small_spec();
        s.shared_dim = 8; // > d_text
        CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
        s = small_spec();
        s.n = 2;
        CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
        s = small_spec();
        s.noise_sigma = -1.0;
        CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
    }
}

TEST_CASE("make_folds") {
    SUBCASE("n=10, k=10") {
        const auto plan = make_folds(10, 10, 3);
        CHECK(plan.fold_sizes() == std::vector<std::size_t>(10, 1));
    }
    SUBCASE("n=23, k=10") {
        auto sizes = make_folds(23, 10, 3).fold_sizes();
        std::sort(sizes.begin(), sizes.end());
        CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 2, 2, 2, 2, 3, 3, 3});
    }
    SUBCASE("deterministic per seed") {
        CHECK(make_folds(50, 5, 9).assignments == make_folds(50, 5, 9).assignments);
        CHECK_FALSE(make_folds(50, 5, 9).assignments == make_folds(50, 5, 10).assignments);
    }
    SUBCASE("bad k") {
        CHECK_THROWS_AS(make_folds(5, 1, 0), std::invalid_argument);
        CHECK_THROWS_AS(make_folds(5, 6, 0), std::invalid_argument);
    }
    SUBCASE("partition property over random n, k") {
        std::mt19937_64 rng(2024);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 2 + rng() % 200;
            const std::size_t k = 2 + rng() % (n - 1);
            const auto plan = make_folds(n, k, rng());
            CAPTURE(n);
            CAPTURE(k);
            std::vector<int> seen(n, 0);
            for (std::size_t f = 0; f < k; ++f) {
                const auto test = plan.test_indices(f);
                const auto train = plan.train_indices(f);
                CHECK(test.size() + train.size() == n);
                CHECK((test.size() == n / k || test.size() == n / k + 1));
                for (std::size_t i : test) ++seen[i];
                std::set<std::size_t> t(test.begin(), test.end());
                for (std::size_t i : train) CHECK(t.count(i) == 0);
            }
            CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        }
    }
}

TEST_CASE("standardizer") {
    const Dataset d = generate_synthetic(small_spec());
    const Standardizer s = Standardizer::fit(d);
    const Dataset z = s.apply(d);
    const Matrix x = z.image_matrix();
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
        mean /= static_cast<double>(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(x.rows());
        CHECK(std::abs(mean) <= 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(z.class_indices() == d.class_indices());
    CHECK_THROWS_AS(s.apply_image(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("subset and label permutation") {
    const Dataset d = generate_synthetic(small_spec());
    const std::vector<std::size_t> idx{5, 0, 2};
    const Dataset s = d.subset(idx);
    CHECK(s.size() == 3);
    CHECK(s[0].image_features == d[5].image_features);
    CHECK(s.num_classes() == d.num_classes());
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    const Dataset p = d.with_labels_from(perm);
    CHECK(p[0].label == d[d.size() - 1].label);
    CHECK(p[0].image_features == d[0].image_features);
}
