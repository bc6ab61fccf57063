// implementation to follow
