pub mod oc;
