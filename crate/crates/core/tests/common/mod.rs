#![allow(dead_code)]
pub mod randmodel;
