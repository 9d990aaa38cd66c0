//! Writes the synthetic demo panel shipped in `data/demo_panel_synthetic.csv`.
//!
//! The values are simulated, not market data. Factors are independent normals
//! with annual means and volatilities of the usual order (percent):
//! Mkt-RF N(6, 17²), SMB N(2.5, 11²), HML N(4, 13²), RMW N(3, 8²),
//! CMA N(3.5, 9²); RF = |N(4.5, 3²)|. The asset's raw return is
//! RF + 2 + 1.1·Mkt-RF − 0.6·SMB + 0.5·HML + N(0, 25²).
//!
//!     cargo run -p linmdd-core --example make_demo_panel > crates/core/data/demo_panel_synthetic.csv

use linmdd_core::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let mut rng = stream_rng(19_640_101, 0);
    let mut normal = |mean: f64, sd: f64| mean + sd * rng.sample::<f64, _>(StandardNormal);
    println!("year,Mkt-RF,SMB,HML,RMW,CMA,RF,ASSET");
    for year in 1964..=2016 {
        let mkt = normal(6.0, 17.0);
        let smb = normal(2.5, 11.0);
        let hml = normal(4.0, 13.0);
        let rmw = normal(3.0, 8.0);
        let cma = normal(3.5, 9.0);
        let rf = normal(4.5, 3.0).abs();
        let asset = rf + 2.0 + 1.1 * mkt - 0.6 * smb + 0.5 * hml + normal(0.0, 25.0);
        let r2 = |v: f64| (v * 100.0).round() / 100.0;
        println!(
            "{year},{},{},{},{},{},{},{}",
            r2(mkt), r2(smb), r2(hml), r2(rmw), r2(cma), r2(rf), r2(asset)
        );
    }
}
