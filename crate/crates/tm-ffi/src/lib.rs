//! Placeholder; filled in once the core library exists.
