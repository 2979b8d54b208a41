pub mod codec_cases;
pub mod gradcheck;
pub mod motion_truth;
pub mod texture_oracle;
