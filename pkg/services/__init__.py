"""Service-layer modules for the lip-reading and MFCC recognition toolkit."""
