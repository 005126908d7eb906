package org.clinic.owner;

import java.util.Collection;
import org.springframework.stereotype.Repository;

@Repository
public interface OwnerRepository {

    Collection<Owner> findByLastName(String lastName);

    Owner findById(int id);

    void save(Owner owner);
}
