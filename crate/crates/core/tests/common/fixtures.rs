use std::fs;
use std::path::{Path, PathBuf};

/// 60 correlated bivariate rows with columns `a,b,group`.
pub fn sample_csv(dir: &Path) -> PathBuf {
    let d = super::normal_data(60, 2, 17);
    let mut text = String::from("a,b,group\n");
    for (i, r) in d.rows().enumerate() {
        text.push_str(&format!("{},{},{}\n", r[0], r[1] + 0.5 * r[0], i % 2));
    }
    let p = dir.join("sample.csv");
    fs::write(&p, text).unwrap();
    p
}

/// Three species of 50 rows in the iris column layout.
pub fn iris_like(dir: &Path) -> PathBuf {
    let mut text = String::from("sepal_length,sepal_width,petal_length,petal_width,species\n");
    let centers = [
        ("setosa", [5.0, 3.4, 1.5, 0.25]),
        ("versicolor", [5.9, 2.8, 4.3, 1.3]),
        ("virginica", [6.6, 3.0, 5.6, 2.0]),
    ];
    for (s, (name, c)) in centers.iter().enumerate() {
        let z = super::normal_data(50, 4, 40 + s as u64);
        for r in z.rows() {
            let x: Vec<String> = (0..4).map(|j| format!("{:.1}", c[j] + 0.3 * r[j] + 0.1 * r[0])).collect();
            text.push_str(&format!("{},{name}\n", x.join(",")));
        }
    }
    let p = dir.join("iris.csv");
    fs::write(&p, text).unwrap();
    p
}

/// Name and bytes of every output except the timing sidecar, sorted.
pub fn deterministic_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

