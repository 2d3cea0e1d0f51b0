import java.io.File;
import java.io.FileInputStream;
import java.io.IOException;
import java.sql.Connection;
import java.sql.PreparedStatement;
import java.sql.SQLException;

class FileHandler {
    private final String base;

    FileHandler(String base) {
        this.base = base;
    }

    private boolean isSafePath(String p) {
        if (p == null || p.contains("..")) {
            return false;
        }
        try {
            String root = new File(base).getCanonicalPath();
            return new File(base, p).getCanonicalPath().startsWith(root);
        } catch (IOException e) {
            return false;
        }
    }

    public byte[] handler(String path) throws IOException {
        if (!isSafePath(path)) {
            throw new SecurityException("path escapes base directory");
        }
        try (FileInputStream in = new FileInputStream(new File(base, path))) {
            return in.readAllBytes();
        }
    }

    public void audit(Connection conn, String user, String path) throws SQLException {
        try (PreparedStatement st = conn.prepareStatement("INSERT INTO audit (user, path) VALUES (?, ?)")) {
            st.setString(1, user);
            st.setString(2, path);
            st.executeUpdate();
        } catch (SQLException e) {
            throw new IllegalStateException("audit failed", e);
        }
    }
}
